#include "ccgen/schema.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "ccgen/common.hpp"

namespace ccgen {

RecordSchema::RecordSchema(std::vector<VariableSpec> variables) : variables_(std::move(variables)) {
  if (variables_.empty()) throw ValidationError("schema: no variables");
  std::set<std::string, std::less<>> seen;
  offsets_.reserve(variables_.size());
  for (const auto& v : variables_) {
    if (v.name.empty()) throw ValidationError("schema: variable with empty name");
    if (v.name == kTextColumn) throw ValidationError("schema: variable name collides with chief_complaint");
    if (!seen.insert(v.name).second) throw ValidationError("schema: duplicate variable '" + v.name + "'");
    if (v.cardinality == 0) throw ValidationError("schema: variable '" + v.name + "' has zero cardinality");
    offsets_.push_back(total_dim_);
    total_dim_ += v.cardinality;
  }
}

std::optional<std::size_t> RecordSchema::find(std::string_view name) const {
  for (std::size_t i = 0; i < variables_.size(); ++i) {
    if (variables_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t RecordSchema::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw ValidationError("unknown variable '" + std::string(name) + "'");
}

std::pair<std::size_t, int> RecordSchema::locate(std::size_t bit) const {
  if (bit >= total_dim_) throw ValidationError("bit index " + std::to_string(bit) + " outside record");
  const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), bit);
  const auto var = static_cast<std::size_t>(it - offsets_.begin()) - 1;
  return {var, static_cast<int>(bit - offsets_[var])};
}

nlohmann::json RecordSchema::to_json() const {
  nlohmann::json vars = nlohmann::json::array();
  for (const auto& v : variables_) {
    vars.push_back({{"name", v.name},
                    {"cardinality", v.cardinality},
                    {"multi_valued", v.multi_valued},
                    {"allow_missing", v.allow_missing}});
  }
  return {{"variables", vars}};
}

RecordSchema load_schema(const nlohmann::json& config) {
  if (!config.is_object() || !config.contains("variables") || !config["variables"].is_array()) {
    throw ValidationError("schema config: expected an object with a 'variables' array");
  }
  std::vector<VariableSpec> vars;
  for (const auto& item : config["variables"]) {
    VariableSpec v;
    try {
      v.name = item.at("name").get<std::string>();
      const auto card = item.at("cardinality").get<long long>();
      if (card < 0) throw ValidationError("schema: variable '" + v.name + "' has negative cardinality");
      v.cardinality = static_cast<std::size_t>(card);
      v.multi_valued = item.value("multi_valued", false);
      v.allow_missing = item.value("allow_missing", true);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("schema config: ") + e.what());
    }
    vars.push_back(std::move(v));
  }
  return RecordSchema(std::move(vars));
}

nlohmann::json read_config_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  try {
    return nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
}

RecordSchema load_schema_file(const std::filesystem::path& path) { return load_schema(read_config_json(path)); }

std::vector<std::size_t> EncodedRecord::set_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) out.push_back(i);
  }
  return out;
}

EncodedRecord EncodedRecord::from_indices(std::span<const std::size_t> indices, std::size_t dim) {
  EncodedRecord r;
  r.bits.assign(dim, 0);
  for (auto i : indices) {
    if (i >= dim) throw ValidationError("record bit " + std::to_string(i) + " outside dimension " + std::to_string(dim));
    r.bits[i] = 1;
  }
  return r;
}

RawRecord empty_record(const RecordSchema& schema) {
  RawRecord r;
  r.values.resize(schema.size());
  return r;
}

void validate_record(const RawRecord& raw, const RecordSchema& schema) {
  if (raw.values.size() != schema.size()) {
    throw ValidationError("record has " + std::to_string(raw.values.size()) + " variables, schema has " +
                          std::to_string(schema.size()));
  }
  for (std::size_t v = 0; v < schema.size(); ++v) {
    const auto& spec = schema.variable(v);
    const auto& codes = raw.values[v];
    if (codes.empty() && !spec.allow_missing) throw ValidationError("variable '" + spec.name + "' is missing");
    if (!spec.multi_valued && codes.size() > 1) {
      throw ValidationError("variable '" + spec.name + "' is single-valued but has " + std::to_string(codes.size()) +
                            " values");
    }
    for (int c : codes) {
      if (c < 0 || static_cast<std::size_t>(c) >= spec.cardinality) {
        throw ValidationError("variable '" + spec.name + "' value " + std::to_string(c) + " outside [0, " +
                              std::to_string(spec.cardinality) + ")");
      }
    }
    if (codes.size() > 1) {
      std::vector<int> sorted = codes;
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw ValidationError("variable '" + spec.name + "' lists a code twice");
      }
    }
  }
}

EncodedRecord encode_record(const RawRecord& raw, const RecordSchema& schema) {
  validate_record(raw, schema);
  EncodedRecord out;
  out.bits.assign(schema.total_dim(), 0);
  for (std::size_t v = 0; v < schema.size(); ++v) {
    for (int c : raw.values[v]) out.bits[schema.offset(v) + static_cast<std::size_t>(c)] = 1;
  }
  return out;
}

RawRecord decode_record(std::span<const std::size_t> set_bits, const RecordSchema& schema) {
  RawRecord r = empty_record(schema);
  for (auto bit : set_bits) {
    const auto [var, code] = schema.locate(bit);
    r.values[var].push_back(code);
  }
  for (auto& codes : r.values) std::sort(codes.begin(), codes.end());
  validate_record(r, schema);
  return r;
}

RawRecord decode_record(const EncodedRecord& encoded, const RecordSchema& schema) {
  if (encoded.bits.size() != schema.total_dim()) throw ValidationError("encoded record dimension mismatch");
  const auto idx = encoded.set_indices();
  return decode_record(idx, schema);
}

bool read_csv_row(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;
  std::string field;
  bool quoted = false;
  bool any = false;
  char ch;
  while (in.get(ch)) {
    any = true;
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch == '\n') {
      break;
    } else if (ch != '\r') {
      field.push_back(ch);
    }
  }
  if (!any) return false;
  fields.push_back(std::move(field));
  return true;
}

namespace {

bool parse_code(std::string_view cell, int& out) {
  while (!cell.empty() && cell.front() == ' ') cell.remove_prefix(1);
  while (!cell.empty() && cell.back() == ' ') cell.remove_suffix(1);
  if (cell.empty()) return false;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return res.ec == std::errc{} && res.ptr == cell.data() + cell.size();
}

std::string csv_quote(std::string_view s) {
  const bool needs = s.find_first_of(",\"\n\r") != std::string_view::npos || (!s.empty() && (s.front() == ' ' || s.back() == ' '));
  if (!needs) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

CsvIngest ingest_csv(std::istream& in, const RecordSchema& schema) {
  std::vector<std::string> header;
  if (!read_csv_row(in, header)) throw ValidationError("csv: empty input, expected a header row");
  if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) header[0].erase(0, 3);

  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column.emplace(header[i], i);
  std::vector<std::size_t> var_col(schema.size());
  for (std::size_t v = 0; v < schema.size(); ++v) {
    const auto it = column.find(schema.variable(v).name);
    if (it == column.end()) throw ValidationError("csv: missing required column '" + schema.variable(v).name + "'");
    var_col[v] = it->second;
  }
  const auto text_it = column.find(std::string(kTextColumn));
  if (text_it == column.end()) throw ValidationError("csv: missing required column 'chief_complaint'");
  const std::size_t text_col = text_it->second;

  CsvIngest out;
  std::vector<std::string> fields;
  std::size_t row = 0;
  while (read_csv_row(in, fields)) {
    ++row;
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    if (fields.size() != header.size()) {
      out.rejected.push_back("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                             " fields, found " + std::to_string(fields.size()));
      continue;
    }
    RecordText rt;
    rt.record = empty_record(schema);
    std::string error;
    for (std::size_t v = 0; v < schema.size() && error.empty(); ++v) {
      const std::string& cell = fields[var_col[v]];
      if (cell.empty()) continue;
      const auto& spec = schema.variable(v);
      std::string_view rest = cell;
      while (true) {
        const auto semi = spec.multi_valued ? rest.find(';') : std::string_view::npos;
        const auto piece = rest.substr(0, semi);
        int code = 0;
        if (!parse_code(piece, code)) {
          error = "variable '" + spec.name + "': cannot parse '" + std::string(piece) + "' as an integer";
          break;
        }
        rt.record.values[v].push_back(code);
        if (semi == std::string_view::npos) break;
        rest.remove_prefix(semi + 1);
      }
    }
    if (error.empty()) {
      try {
        validate_record(rt.record, schema);
      } catch (const ValidationError& e) {
        error = e.what();
      }
    }
    if (!error.empty()) {
      out.rejected.push_back("row " + std::to_string(row) + ": " + error);
      continue;
    }
    rt.text = fields[text_col];
    out.rows.push_back(std::move(rt));
  }
  return out;
}

CsvIngest ingest_csv(const std::filesystem::path& path, const RecordSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return ingest_csv(in, schema);
}

void write_csv(std::ostream& out, std::span<const RecordText> rows, const RecordSchema& schema) {
  for (std::size_t v = 0; v < schema.size(); ++v) out << schema.variable(v).name << ',';
  out << kTextColumn << '\n';
  for (const auto& rt : rows) {
    validate_record(rt.record, schema);
    for (std::size_t v = 0; v < schema.size(); ++v) {
      const auto& codes = rt.record.values[v];
      for (std::size_t k = 0; k < codes.size(); ++k) {
        if (k) out << ';';
        out << codes[k];
      }
      out << ',';
    }
    out << csv_quote(rt.text) << '\n';
  }
}

void write_csv(const std::filesystem::path& path, std::span<const RecordText> rows, const RecordSchema& schema) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  write_csv(out, rows, schema);
}

}  // namespace ccgen
