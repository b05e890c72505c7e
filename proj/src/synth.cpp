#include "ccgen/synth.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <set>

#include "ccgen/common.hpp"
#include "ccgen/rng.hpp"
#include "ccgen/text.hpp"

namespace ccgen {

namespace {

using nlohmann::json;

Condition parse_condition(const json& j) {
  Condition c;
  c.variable = j.at("variable").get<std::string>();
  c.categories = j.at("categories").get<std::vector<int>>();
  return c;
}

void check_condition(const Condition& c, const RecordSchema& schema, const std::string& where) {
  const auto v = schema.find(c.variable);
  if (!v) throw ValidationError(where + ": unknown variable '" + c.variable + "'");
  const auto card = static_cast<int>(schema.variable(*v).cardinality);
  for (int k : c.categories) {
    if (k < 0 || k >= card) throw ValidationError(where + ": category " + std::to_string(k) + " out of range");
  }
}

std::vector<std::string> placeholders(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = text.find('{', pos)) != std::string::npos) {
    const auto end = text.find('}', pos);
    if (end == std::string::npos) throw ValidationError("unterminated placeholder in '" + text + "'");
    out.push_back(text.substr(pos + 1, end - pos - 1));
    pos = end + 1;
  }
  return out;
}

bool satisfies(const Condition& c, const RawRecord& r, const RecordSchema& schema) {
  const auto& vals = r.values[schema.index_of(c.variable)];
  for (int v : vals) {
    if (std::find(c.categories.begin(), c.categories.end(), v) != c.categories.end()) return true;
  }
  return false;
}

int draw_value(const CategoricalSpec* spec, std::size_t cardinality, Rng& rng) {
  if (!spec || spec->weights.empty()) return static_cast<int>(rng.below(cardinality));
  return static_cast<int>(rng.categorical(spec->weights));
}

std::string fill_slots(const std::string& text, const std::map<std::string, std::vector<std::string>>& slots,
                       Rng& rng) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const auto open = text.find('{', pos);
    if (open == std::string::npos) {
      out += text.substr(pos);
      break;
    }
    const auto close = text.find('}', open);
    out += text.substr(pos, open - pos);
    const auto& options = slots.at(text.substr(open + 1, close - open - 1));
    out += options[rng.below(options.size())];
    pos = close + 1;
  }
  return out;
}

std::string mutate(const std::string& tok, Rng& rng) {
  std::string t = tok;
  if (t.size() >= 2) {
    const std::size_t j = rng.below(t.size() - 1);
    std::swap(t[j], t[j + 1]);
    if (t == tok) t.erase(j, 1);
  } else {
    t += t;
  }
  return t;
}

std::string join_tokens(const std::vector<std::string>& toks) {
  std::string s;
  for (const auto& t : toks) {
    if (!s.empty()) s.push_back(' ');
    s += t;
  }
  return s;
}

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

}  // namespace

GenConfig load_gen_config(const json& j, const std::filesystem::path& base_dir) {
  GenConfig c;
  try {
    c.size = j.at("size").get<std::size_t>();
    const auto& sj = j.at("schema");
    if (sj.is_string()) {
      std::filesystem::path p = sj.get<std::string>();
      if (p.is_relative()) p = base_dir / p;
      c.schema = load_schema_file(p);
    } else {
      c.schema = load_schema(sj);
    }
    c.diagnosis_variable = j.value("diagnosis_variable", std::string("diagnosis"));
    const auto dx = c.schema.find(c.diagnosis_variable);
    if (!dx) throw ValidationError("unknown diagnosis variable '" + c.diagnosis_variable + "'");
    const auto dx_card = static_cast<int>(c.schema.variable(*dx).cardinality);

    if (j.contains("variables")) {
      for (const auto& [name, v] : j["variables"].items()) {
        const auto idx = c.schema.find(name);
        if (!idx) throw ValidationError("variables: unknown variable '" + name + "'");
        CategoricalSpec spec;
        spec.weights = v.value("weights", std::vector<double>{});
        spec.missing = v.value("missing", 0.0);
        if (!spec.weights.empty() && spec.weights.size() != c.schema.variable(*idx).cardinality) {
          throw ValidationError("variables: '" + name + "' needs " +
                                std::to_string(c.schema.variable(*idx).cardinality) + " weights");
        }
        c.variables[name] = std::move(spec);
      }
    }
    if (j.contains("exclusive")) {
      for (const auto& g : j["exclusive"]) {
        ExclusiveGroup eg;
        eg.variables = g.at("variables").get<std::vector<std::string>>();
        eg.weights = g.value("weights", std::vector<double>(eg.variables.size(), 1.0));
        eg.missing = g.value("missing", 0.0);
        if (eg.weights.size() != eg.variables.size() || eg.variables.empty()) {
          throw ValidationError("exclusive group: one weight per variable required");
        }
        for (const auto& v : eg.variables) {
          if (!c.schema.find(v)) throw ValidationError("exclusive group: unknown variable '" + v + "'");
        }
        c.exclusive.push_back(std::move(eg));
      }
    }
    if (j.contains("slots")) c.slots = j["slots"].get<std::map<std::string, std::vector<std::string>>>();
    for (const auto& [name, opts] : c.slots) {
      if (opts.empty()) throw ValidationError("slot '" + name + "' has no options");
    }
    std::set<int> codes;
    for (const auto& tj : j.at("templates")) {
      TemplateSpec t;
      t.code = tj.at("code").get<int>();
      t.weight = tj.value("weight", 1.0);
      if (t.code < 0 || t.code >= dx_card) throw ValidationError("template code " + std::to_string(t.code) + " out of range");
      if (!codes.insert(t.code).second) throw ValidationError("duplicate template code " + std::to_string(t.code));
      for (const auto& pj : tj.at("phrases")) {
        PhraseSpec p;
        if (pj.is_string()) {
          p.text = pj.get<std::string>();
        } else {
          p.text = pj.at("text").get<std::string>();
          p.weight = pj.value("weight", 1.0);
        }
        for (const auto& slot : placeholders(p.text)) {
          if (!c.slots.count(slot)) throw ValidationError("phrase '" + p.text + "' uses unknown slot {" + slot + "}");
        }
        t.phrases.push_back(std::move(p));
      }
      if (t.phrases.empty()) throw ValidationError("template " + std::to_string(t.code) + " has no phrases");
      c.templates.push_back(std::move(t));
    }
    if (c.templates.empty()) throw ValidationError("generator config needs at least one template");
    c.missing_diagnosis_rate = j.value("missing_diagnosis_rate", 0.0);
    c.secondary_code_rate = j.value("secondary_code_rate", 0.0);
    if (j.contains("noise")) {
      c.noise_rate = j["noise"].value("rate", 0.0);
      c.noise_words = j["noise"].value("words", std::vector<std::string>{});
      c.long_tail_rate = j["noise"].value("long_tail_rate", 0.0);
      if ((c.noise_rate > 0 || c.long_tail_rate > 0) && c.noise_words.empty()) {
        throw ValidationError("noise: rate set but no words given");
      }
    }
    c.typo_rate = j.value("typo_rate", 0.0);
    c.capitalize_rate = j.value("capitalize_rate", 0.0);
    if (j.contains("word_rules")) {
      for (const auto& rj : j["word_rules"]) {
        WordRule r;
        r.word = rj.at("word").get<std::string>();
        r.base_rate = rj.at("base_rate").get<double>();
        r.when = parse_condition(rj.at("when"));
        r.multiplier = rj.value("multiplier", 1.0);
        check_condition(r.when, c.schema, "word rule '" + r.word + "'");
        c.word_rules.push_back(std::move(r));
      }
    }
    if (j.contains("prevalence_rules")) {
      for (const auto& rj : j["prevalence_rules"]) {
        PrevalenceRule r;
        r.code = rj.at("code").get<int>();
        r.when = parse_condition(rj.at("when"));
        r.multiplier = rj.value("multiplier", 1.0);
        if (!codes.count(r.code)) throw ValidationError("prevalence rule for code without template: " + std::to_string(r.code));
        check_condition(r.when, c.schema, "prevalence rule");
        c.prevalence_rules.push_back(std::move(r));
      }
    }
    if (j.contains("names")) {
      const auto& nj = j["names"];
      c.names.tokens = nj.value("tokens", std::vector<std::string>{});
      c.names.counts = nj.value("counts", std::vector<std::size_t>{});
      c.names.min_count = nj.value("min_count", std::size_t{10});
      c.names.max_count = nj.value("max_count", std::size_t{20});
      c.names.contexts = nj.value("contexts", std::vector<std::string>{});
      if (!c.names.counts.empty() && c.names.counts.size() != c.names.tokens.size()) {
        throw ValidationError("names: counts must match tokens");
      }
      if (c.names.min_count > c.names.max_count) throw ValidationError("names: min_count > max_count");
      if (!c.names.tokens.empty() && c.names.contexts.empty()) throw ValidationError("names: contexts required");
      for (const auto& ctx : c.names.contexts) {
        if (ctx.find("{text}") == std::string::npos || ctx.find("{name}") == std::string::npos) {
          throw ValidationError("names: context '" + ctx + "' must contain {text} and {name}");
        }
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("generator config: ") + e.what());
  }
  return c;
}

GenConfig load_gen_config_file(const std::filesystem::path& path) {
  return load_gen_config(read_config_json(path), path.parent_path());
}

std::vector<RecordText> synth_corpus(const GenConfig& config, std::uint64_t seed, SynthInfo* info) {
  const auto& schema = config.schema;
  const std::size_t dx = schema.index_of(config.diagnosis_variable);
  const std::size_t dx_card = schema.variable(dx).cardinality;

  std::vector<int> in_group(schema.size(), -1);
  for (std::size_t g = 0; g < config.exclusive.size(); ++g) {
    for (const auto& v : config.exclusive[g].variables) in_group[schema.index_of(v)] = static_cast<int>(g);
  }

  std::vector<RecordText> out;
  out.reserve(config.size);
  std::vector<double> code_w(config.templates.size());
  std::vector<double> phrase_w;
  for (std::size_t i = 0; i < config.size; ++i) {
    Rng rng = Rng::derive(seed, i);
    RecordText rt;
    rt.record = empty_record(schema);
    auto& vals = rt.record.values;

    std::vector<bool> group_done(config.exclusive.size(), false);
    for (std::size_t v = 0; v < schema.size(); ++v) {
      if (v == dx) continue;
      const auto& var = schema.variable(v);
      if (in_group[v] >= 0) {
        const auto g = static_cast<std::size_t>(in_group[v]);
        if (group_done[g]) continue;
        group_done[g] = true;
        const auto& eg = config.exclusive[g];
        if (rng.bernoulli(eg.missing)) continue;
        const auto& chosen = eg.variables[rng.categorical(eg.weights)];
        const auto ci = schema.index_of(chosen);
        const auto it = config.variables.find(chosen);
        vals[ci] = {draw_value(it == config.variables.end() ? nullptr : &it->second, schema.variable(ci).cardinality, rng)};
        continue;
      }
      const auto it = config.variables.find(var.name);
      const CategoricalSpec* spec = it == config.variables.end() ? nullptr : &it->second;
      if (spec && rng.bernoulli(spec->missing)) continue;
      vals[v] = {draw_value(spec, var.cardinality, rng)};
    }

    for (std::size_t t = 0; t < config.templates.size(); ++t) {
      double w = config.templates[t].weight;
      for (const auto& rule : config.prevalence_rules) {
        if (rule.code == config.templates[t].code && satisfies(rule.when, rt.record, schema)) w *= rule.multiplier;
      }
      code_w[t] = w;
    }
    const auto& tmpl = config.templates[rng.categorical(code_w)];
    const bool dx_missing = rng.bernoulli(config.missing_diagnosis_rate);
    const bool secondary = rng.bernoulli(config.secondary_code_rate);
    const int extra = static_cast<int>(rng.below(dx_card - 1));
    if (!dx_missing) {
      vals[dx] = {tmpl.code};
      if (secondary) vals[dx].push_back(extra >= tmpl.code ? extra + 1 : extra);
    }

    phrase_w.clear();
    for (const auto& p : tmpl.phrases) phrase_w.push_back(p.weight);
    std::string text = fill_slots(tmpl.phrases[rng.categorical(phrase_w)].text, config.slots, rng);
    auto toks = tokenize(text);
    for (const auto& rule : config.word_rules) {
      const double p = std::min(1.0, rule.base_rate * (satisfies(rule.when, rt.record, schema) ? rule.multiplier : 1.0));
      if (rng.bernoulli(p) && std::find(toks.begin(), toks.end(), rule.word) == toks.end()) {
        toks.insert(toks.begin(), rule.word);
      }
    }
    if (rng.bernoulli(config.noise_rate)) {
      const auto pos = rng.below(toks.size() + 1);
      toks.insert(toks.begin() + static_cast<std::ptrdiff_t>(pos), config.noise_words[rng.below(config.noise_words.size())]);
    }
    if (rng.bernoulli(config.long_tail_rate)) {
      const std::size_t n = 12 + rng.below(9);
      for (std::size_t k = 0; k < n; ++k) toks.push_back(config.noise_words[rng.below(config.noise_words.size())]);
    }
    if (!toks.empty() && rng.bernoulli(config.typo_rate)) {
      auto& victim = toks[rng.below(toks.size())];
      victim = mutate(victim, rng);
    }
    text = join_tokens(toks);
    if (rng.bernoulli(config.capitalize_rate)) {
      for (auto& ch : text) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    }
    rt.text = std::move(text);
    out.push_back(std::move(rt));
  }

  // Sentinel names: each planted exactly `count` times into distinct records.
  if (!config.names.tokens.empty() && !out.empty()) {
    Rng rng = Rng::derive(seed, fnv1a64("sentinel-names"));
    std::vector<std::size_t> slots(out.size());
    std::iota(slots.begin(), slots.end(), std::size_t{0});
    rng.shuffle(slots.begin(), slots.end());
    std::size_t next = 0;
    for (std::size_t n = 0; n < config.names.tokens.size(); ++n) {
      const std::size_t count =
          config.names.counts.empty()
              ? config.names.min_count + rng.below(config.names.max_count - config.names.min_count + 1)
              : config.names.counts[n];
      std::size_t planted = 0;
      for (; planted < count && next < slots.size(); ++planted, ++next) {
        auto& rt = out[slots[next]];
        const auto& ctx = config.names.contexts[rng.below(config.names.contexts.size())];
        rt.text = replace_all(replace_all(ctx, "{text}", rt.text), "{name}", config.names.tokens[n]);
      }
      if (info) info->planted_names[config.names.tokens[n]] = planted;
    }
  }
  return out;
}

}  // namespace ccgen
