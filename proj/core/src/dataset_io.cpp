#include "fedprint/dataset_io.hpp"

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <system_error>

#include "fedprint/errors.hpp"

namespace fedprint {

namespace {

constexpr std::size_t kColumnCount = kFeatureCount + 2;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

std::optional<double> parse_double(std::string_view s) {
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec == std::errc() && ptr == s.data() + s.size() && !s.empty()) return v;
  // Some exports write integral ids as "3.0".
  if (auto d = parse_double(s); d && *d == static_cast<double>(static_cast<std::int64_t>(*d)))
    return static_cast<std::int64_t>(*d);
  return std::nullopt;
}

std::array<std::string, kColumnCount> canonical_columns() {
  std::array<std::string, kColumnCount> cols;
  for (std::size_t i = 0; i < kFeatureCount; ++i) cols[i] = kFeatureNames[i];
  cols[kFeatureCount] = "model";
  cols[kFeatureCount + 1] = "device_id";
  return cols;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string dataset_header() {
  std::string h;
  for (const auto& c : canonical_columns()) {
    if (!h.empty()) h += ',';
    h += c;
  }
  return h;
}

std::string format_dataset(std::span<const FeatureVector> rows) {
  std::string out = dataset_header() + "\n";
  out.reserve(rows.size() * 200);
  for (const auto& r : rows) {
    for (double v : r.features()) {
      out += format_double(v);
      out += ',';
    }
    out += to_string(r.model_label);
    out += ',';
    out += std::to_string(r.device_id);
    out += '\n';
  }
  return out;
}

void write_dataset(std::span<const FeatureVector> rows, const std::filesystem::path& path) {
  if (rows.empty()) throw InputError("refusing to write an empty dataset");
  write_file_atomic(path, format_dataset(rows));
}

std::vector<FeatureVector> parse_dataset(const std::string& text, const DatasetSchema& schema) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;

  std::vector<std::string_view> header;
  std::string header_line;
  while (std::getline(in, header_line)) {
    ++line_no;
    if (!trim(header_line).empty()) break;
  }
  if (trim(header_line).empty()) throw ParseError("dataset has no header", line_no);
  // Tolerate a UTF-8 byte-order mark.
  if (header_line.rfind("\xEF\xBB\xBF", 0) == 0) header_line.erase(0, 3);
  header = split_csv(header_line);

  std::array<std::size_t, kColumnCount> index{};
  const auto cols = canonical_columns();
  for (std::size_t c = 0; c < kColumnCount; ++c) {
    const auto mapped = schema.column_names.find(cols[c]);
    const std::string& want = mapped != schema.column_names.end() ? mapped->second : cols[c];
    std::size_t found = header.size();
    for (std::size_t h = 0; h < header.size(); ++h)
      if (header[h] == want) found = h;
    if (found == header.size())
      throw ParseError("header is missing column '" + want + "'", line_no);
    index[c] = found;
  }

  std::vector<FeatureVector> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " columns, found " +
                           std::to_string(fields.size()),
                       line_no);
    std::array<double, kFeatureCount> values{};
    for (std::size_t c = 0; c < kFeatureCount; ++c) {
      const auto v = parse_double(fields[index[c]]);
      if (!v)
        throw ParseError("non-numeric value '" + std::string(fields[index[c]]) +
                             "' in column " + cols[c],
                         line_no);
      values[c] = *v;
    }
    FeatureVector fv;
    fv.set_features(values);

    const std::string label(fields[index[kFeatureCount]]);
    if (auto alias = schema.label_aliases.find(label); alias != schema.label_aliases.end()) {
      fv.model_label = alias->second;
    } else if (auto m = parse_model(label)) {
      fv.model_label = *m;
    } else {
      throw ParseError("unknown device model label '" + label + "'", line_no);
    }

    const auto id = parse_int(fields[index[kFeatureCount + 1]]);
    if (!id)
      throw ParseError("non-integer device id '" +
                           std::string(fields[index[kFeatureCount + 1]]) + "'",
                       line_no);
    fv.device_id = *id;
    rows.push_back(fv);
  }
  return rows;
}

std::vector<FeatureVector> read_dataset(const std::filesystem::path& path,
                                        const DatasetSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open dataset " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str(), schema);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw InputError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw InputError("cannot rename " + tmp.string() + " to " + path.string() + ": " +
                     ec.message());
  }
}

}  // namespace fedprint
