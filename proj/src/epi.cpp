#include "ccgen/epi.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <set>
#include <sstream>

#include "ccgen/common.hpp"

namespace ccgen {

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

template <typename Indicator>
CrossTab tabulate(std::span<const RawRecord> records, const std::string& target, const std::string& variable,
                  const RecordSchema& schema, Indicator&& indicator) {
  const auto v = schema.find(variable);
  if (!v) throw ValidationError("unknown variable '" + variable + "'");
  CrossTab tab;
  tab.target = target;
  tab.variable = variable;
  tab.categories.assign(schema.variable(*v).cardinality, {});
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto hit = indicator(i);
    if (!hit) continue;
    const auto& vals = records[i].values.at(*v);
    auto bump = [&](CategoryCount& c) {
      ++c.total;
      if (*hit) ++c.containing;
    };
    if (vals.empty()) {
      bump(tab.missing);
      continue;
    }
    for (int k : vals) bump(tab.categories.at(static_cast<std::size_t>(k)));
  }
  return tab;
}

std::string fmt(const std::optional<double>& x) {
  if (!x) return "undef";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *x);
  return buf;
}

nlohmann::json opt_json(const std::optional<double>& x) { return x ? nlohmann::json(*x) : nlohmann::json(nullptr); }

std::string group_label(const std::vector<int>& g) {
  if (g.empty()) return "others";
  std::string s;
  for (int k : g) s += (s.empty() ? "" : ",") + std::to_string(k);
  return s;
}

}  // namespace

nlohmann::json CrossTab::to_json() const {
  nlohmann::json cats = nlohmann::json::array();
  for (const auto& c : categories) cats.push_back({c.containing, c.total});
  return {{"target", target}, {"variable", variable}, {"categories", cats},
          {"missing", {missing.containing, missing.total}}};
}

CrossTab word_by_category(std::span<const RawRecord> records, std::span<const TokenList> sentences,
                          const std::string& word, const std::string& variable, const RecordSchema& schema) {
  if (records.size() != sentences.size()) throw ValidationError("word_by_category: records and sentences misaligned");
  const auto w = lower(word);
  return tabulate(records, w, variable, schema, [&](std::size_t i) -> std::optional<bool> {
    return std::any_of(sentences[i].begin(), sentences[i].end(), [&](const std::string& t) { return lower(t) == w; });
  });
}

CrossTab code_by_category(std::span<const RawRecord> records, int code, const std::string& diagnosis_variable,
                          const std::string& variable, const RecordSchema& schema) {
  const auto dx = schema.find(diagnosis_variable);
  if (!dx) throw ValidationError("unknown diagnosis variable '" + diagnosis_variable + "'");
  if (code < 0 || static_cast<std::size_t>(code) >= schema.variable(*dx).cardinality) {
    throw ValidationError("diagnosis code " + std::to_string(code) + " out of range");
  }
  return tabulate(records, std::to_string(code), variable, schema, [&](std::size_t i) -> std::optional<bool> {
    const auto& codes = records[i].values.at(*dx);
    if (codes.empty()) return std::nullopt;
    return std::find(codes.begin(), codes.end(), code) != codes.end();
  });
}

nlohmann::json RatioResult::to_json() const {
  return {{"a", a}, {"n_a", n_a}, {"b", b}, {"n_b", n_b}, {"risk_ratio", opt_json(risk_ratio)},
          {"odds_ratio", opt_json(odds_ratio)}};
}

RatioResult ratio_from_counts(std::size_t a, std::size_t n_a, std::size_t b, std::size_t n_b) {
  if (a > n_a || b > n_b) throw ValidationError("ratio: count exceeds group size");
  RatioResult r{a, n_a, b, n_b, std::nullopt, std::nullopt};
  const auto A = static_cast<double>(a), NA = static_cast<double>(n_a);
  const auto B = static_cast<double>(b), NB = static_cast<double>(n_b);
  if (n_a > 0 && n_b > 0 && b > 0) r.risk_ratio = (A / NA) / (B / NB);
  if (n_a > a && n_b > b && b > 0) r.odds_ratio = (A / (NA - A)) / (B / (NB - B));
  return r;
}

RatioResult group_ratio(const CrossTab& tab, std::span<const int> group_a, std::span<const int> group_b) {
  if (group_a.empty() || group_b.empty()) throw ValidationError("group_ratio: groups must be non-empty");
  const std::set<int> sa(group_a.begin(), group_a.end());
  for (int k : group_b) {
    if (sa.count(k)) throw ValidationError("group_ratio: category " + std::to_string(k) + " is in both groups");
  }
  auto pool = [&](std::span<const int> g) {
    CategoryCount c;
    for (int k : g) {
      if (k < 0 || static_cast<std::size_t>(k) >= tab.categories.size()) {
        throw ValidationError("group_ratio: category " + std::to_string(k) + " out of range for " + tab.variable);
      }
      c.containing += tab.categories[static_cast<std::size_t>(k)].containing;
      c.total += tab.categories[static_cast<std::size_t>(k)].total;
    }
    return c;
  };
  const auto ca = pool(group_a), cb = pool(group_b);
  return ratio_from_counts(ca.containing, ca.total, cb.containing, cb.total);
}

RatioResult diagnosis_ratio(std::span<const RawRecord> records, int code, std::span<const int> group_a,
                            std::span<const int> group_b, const std::string& diagnosis_variable,
                            const std::string& variable, const RecordSchema& schema) {
  return group_ratio(code_by_category(records, code, diagnosis_variable, variable, schema), group_a, group_b);
}

ProbeConfig load_probe_config(const nlohmann::json& j, const RecordSchema& schema) {
  ProbeConfig cfg;
  try {
    cfg.threshold = j.value("threshold", 1.1);
    cfg.diagnosis_variable = j.value("diagnosis_variable", std::string("diagnosis"));
    if (cfg.threshold < 1.0) throw ValidationError("probe config: threshold must be >= 1");
    for (const auto& pj : j.value("probes", nlohmann::json::array())) {
      Probe p;
      const auto kind = pj.at("kind").get<std::string>();
      if (kind == "word") {
        p.kind = ProbeKind::Word;
        p.target = lower(pj.at("target").get<std::string>());
      } else if (kind == "code") {
        p.kind = ProbeKind::Code;
        const auto& t = pj.at("target");
        p.target = t.is_string() ? t.get<std::string>() : std::to_string(t.get<int>());
      } else {
        throw ValidationError("probe kind must be word or code, got '" + kind + "'");
      }
      p.variable = pj.at("variable").get<std::string>();
      const auto v = schema.find(p.variable);
      if (!v) throw ValidationError("probe: unknown variable '" + p.variable + "'");
      p.group_a = pj.at("groupA").get<std::vector<int>>();
      const auto& gb = pj.at("groupB");
      if (gb.is_string()) {
        if (gb.get<std::string>() != "others") throw ValidationError("probe: groupB must be a list or \"others\"");
      } else {
        p.group_b = gb.get<std::vector<int>>();
      }
      cfg.probes.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("probe config: ") + e.what());
  }
  return cfg;
}

nlohmann::json ProbeRow::to_json() const {
  return {{"kind", probe.kind == ProbeKind::Word ? "word" : "code"},
          {"target", probe.target},
          {"variable", probe.variable},
          {"groupA", probe.group_a},
          {"groupB", probe.group_b.empty() ? nlohmann::json("others") : nlohmann::json(probe.group_b)},
          {"authentic", authentic.to_json()},
          {"synthetic", synthetic.to_json()},
          {"verdict", verdict}};
}

std::string verdict(const RatioResult& authentic, const RatioResult& synthetic, double threshold) {
  if (!authentic.risk_ratio || !synthetic.risk_ratio || *authentic.risk_ratio == 0.0) return "undefined";
  const double q = *synthetic.risk_ratio / *authentic.risk_ratio;
  if (q > threshold) return "amplified";
  if (q < 1.0 / threshold) return "attenuated";
  return "preserved";
}

std::vector<ProbeRow> epi_report(std::span<const RawRecord> records, std::span<const TokenList> authentic,
                                 std::span<const TokenList> synthetic, const ProbeConfig& config,
                                 const RecordSchema& schema) {
  if (records.size() != authentic.size() || records.size() != synthetic.size()) {
    throw ValidationError("epi_report: records, authentic and synthetic sentences must be aligned");
  }
  std::vector<ProbeRow> rows;
  for (const auto& p : config.probes) {
    ProbeRow row;
    row.probe = p;
    std::vector<int> gb = p.group_b;
    if (gb.empty()) {
      const auto card = static_cast<int>(schema.variable(schema.index_of(p.variable)).cardinality);
      for (int k = 0; k < card; ++k) {
        if (std::find(p.group_a.begin(), p.group_a.end(), k) == p.group_a.end()) gb.push_back(k);
      }
    }
    if (p.kind == ProbeKind::Word) {
      row.authentic = group_ratio(word_by_category(records, authentic, p.target, p.variable, schema), p.group_a, gb);
      row.synthetic = group_ratio(word_by_category(records, synthetic, p.target, p.variable, schema), p.group_a, gb);
    } else {
      int code = 0;
      try {
        code = std::stoi(p.target);
      } catch (const std::exception&) {
        throw ValidationError("code probe target '" + p.target + "' is not an integer");
      }
      row.authentic = diagnosis_ratio(records, code, p.group_a, gb, config.diagnosis_variable, p.variable, schema);
      row.synthetic = row.authentic;
    }
    row.verdict = verdict(row.authentic, row.synthetic, config.threshold);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_epi_table(std::span<const ProbeRow> rows) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-5s %-10s %-10s %-20s %-10s %17s %9s %9s %17s %9s %9s  %s\n", "kind", "target",
                "variable", "groupA", "groupB", "auth a/nA:b/nB", "auth RR", "auth OR", "syn a/nA:b/nB", "syn RR",
                "syn OR", "verdict");
  out << line;
  for (const auto& r : rows) {
    const auto counts = [](const RatioResult& x) {
      return std::to_string(x.a) + "/" + std::to_string(x.n_a) + ":" + std::to_string(x.b) + "/" + std::to_string(x.n_b);
    };
    std::snprintf(line, sizeof line, "%-5s %-10s %-10s %-20s %-10s %17s %9s %9s %17s %9s %9s  %s\n",
                  r.probe.kind == ProbeKind::Word ? "word" : "code", r.probe.target.c_str(), r.probe.variable.c_str(),
                  group_label(r.probe.group_a).c_str(), group_label(r.probe.group_b).c_str(),
                  counts(r.authentic).c_str(), fmt(r.authentic.risk_ratio).c_str(), fmt(r.authentic.odds_ratio).c_str(),
                  counts(r.synthetic).c_str(), fmt(r.synthetic.risk_ratio).c_str(), fmt(r.synthetic.odds_ratio).c_str(),
                  r.verdict.c_str());
    out << line;
  }
  return out.str();
}

}  // namespace ccgen
