#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace ccgen {

struct VariableSpec {
  std::string name;
  std::size_t cardinality = 0;
  bool multi_valued = false;
  bool allow_missing = true;
};

// Ordered discrete-variable layout of the sparse record vector. Each variable
// owns the block [offset, offset + cardinality); blocks tile [0, total_dim).
class RecordSchema {
 public:
  RecordSchema() = default;
  explicit RecordSchema(std::vector<VariableSpec> variables);

  const std::vector<VariableSpec>& variables() const { return variables_; }
  const VariableSpec& variable(std::size_t i) const { return variables_.at(i); }
  std::size_t size() const { return variables_.size(); }
  std::size_t total_dim() const { return total_dim_; }
  std::size_t offset(std::size_t i) const { return offsets_.at(i); }
  const std::vector<std::size_t>& offsets() const { return offsets_; }

  std::optional<std::size_t> find(std::string_view name) const;
  // Throws ValidationError for unknown names.
  std::size_t index_of(std::string_view name) const;

  // (variable index, coded value) owning a bit position.
  std::pair<std::size_t, int> locate(std::size_t bit) const;

  nlohmann::json to_json() const;

 private:
  std::vector<VariableSpec> variables_;
  std::vector<std::size_t> offsets_;
  std::size_t total_dim_ = 0;
};

// Config form: {"variables": [{"name": ..., "cardinality": ..., "multi_valued":
// bool, "allow_missing": bool}, ...]}.
RecordSchema load_schema(const nlohmann::json& config);
// JSON with // and /* */ comments allowed. Throws ValidationError.
nlohmann::json read_config_json(const std::filesystem::path& path);
RecordSchema load_schema_file(const std::filesystem::path& path);

// Coded values per schema variable, in schema order. An empty slot is a
// missing value; single-valued slots hold at most one code. Multi-valued
// slots keep listing order (the first code is the primary one).
struct RawRecord {
  std::vector<std::vector<int>> values;

  std::optional<int> single(std::size_t var) const {
    const auto& v = values.at(var);
    if (v.empty()) return std::nullopt;
    return v.front();
  }
  bool operator==(const RawRecord&) const = default;
};

struct EncodedRecord {
  std::vector<std::uint8_t> bits;

  std::vector<std::size_t> set_indices() const;
  static EncodedRecord from_indices(std::span<const std::size_t> indices, std::size_t dim);
  bool operator==(const EncodedRecord&) const = default;
};

// One record with its free-text chief complaint.
struct RecordText {
  RawRecord record;
  std::string text;
  bool operator==(const RecordText&) const = default;
};

RawRecord empty_record(const RecordSchema& schema);

// Throws ValidationError naming the offending variable.
void validate_record(const RawRecord& raw, const RecordSchema& schema);

EncodedRecord encode_record(const RawRecord& raw, const RecordSchema& schema);

// Inverse of encode_record up to ordering: multi-valued codes come back sorted.
RawRecord decode_record(const EncodedRecord& encoded, const RecordSchema& schema);
RawRecord decode_record(std::span<const std::size_t> set_bits, const RecordSchema& schema);

inline constexpr std::string_view kTextColumn = "chief_complaint";

struct CsvIngest {
  std::vector<RecordText> rows;
  // One diagnostic per skipped row: "row <n>: <reason>" (1-based data rows).
  std::vector<std::string> rejected;
};

// Header must name every schema variable plus chief_complaint; empty cells are
// missing values and multi-valued cells are ';'-separated codes.
CsvIngest ingest_csv(std::istream& in, const RecordSchema& schema);
CsvIngest ingest_csv(const std::filesystem::path& path, const RecordSchema& schema);

void write_csv(std::ostream& out, std::span<const RecordText> rows, const RecordSchema& schema);
void write_csv(const std::filesystem::path& path, std::span<const RecordText> rows,
               const RecordSchema& schema);

// RFC 4180 row reader (quoted fields may contain commas, quotes, newlines).
bool read_csv_row(std::istream& in, std::vector<std::string>& fields);

}  // namespace ccgen
