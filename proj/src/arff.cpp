// Mulan-style multi-label input: an ARFF file holding every attribute plus an
// XML file whose <label name="..."/> elements say which attributes are labels.

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <map>
#include <regex>
#include <sstream>

#include "entailnet/csv.hpp"
#include "entailnet/dataset.hpp"
#include "entailnet/error.hpp"

namespace entailnet {

namespace {

struct Attribute {
  std::string name;
  FeatureKind kind = FeatureKind::Numeric;
  std::vector<std::string> values;  // nominal only
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string unquote(std::string_view s) {
  s = trim(s);
  if (s.size() >= 2 && (s.front() == '\'' || s.front() == '"') && s.back() == s.front()) {
    std::string out;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
      if (s[i] == '\\' && i + 2 < s.size()) ++i;
      out += s[i];
    }
    return out;
  }
  return std::string(s);
}

// Splits on `sep` outside of single or double quotes.
std::vector<std::string> split_quoted(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  char quote = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (quote != 0) {
      cur += c;
      if (c == '\\' && i + 1 < s.size()) {
        cur += s[++i];
      } else if (c == quote) {
        quote = 0;
      }
    } else if (c == '\'' || c == '"') {
      quote = c;
      cur += c;
    } else if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  return parts;
}

// Reads "<name> <rest>" where name may be quoted.
std::pair<std::string, std::string_view> take_name(std::string_view s, std::size_t line) {
  s = trim(s);
  if (s.empty()) throw DataError("ARFF line " + std::to_string(line) + ": attribute name missing");
  std::size_t end = 0;
  if (s.front() == '\'' || s.front() == '"') {
    const char q = s.front();
    end = 1;
    while (end < s.size() && s[end] != q) end += (s[end] == '\\') ? 2 : 1;
    if (end >= s.size()) throw DataError("ARFF line " + std::to_string(line) + ": unterminated quoted name");
    ++end;
  } else {
    while (end < s.size() && !std::isspace(static_cast<unsigned char>(s[end])) && s[end] != '{') ++end;
  }
  return {unquote(s.substr(0, end)), trim(s.substr(end))};
}

Attribute parse_attribute(std::string_view body, std::size_t line) {
  auto [name, type] = take_name(body, line);
  Attribute attr{name, FeatureKind::Numeric, {}};
  if (!type.empty() && type.front() == '{') {
    const auto close = type.rfind('}');
    if (close == std::string_view::npos) {
      throw DataError("ARFF line " + std::to_string(line) + ": unterminated nominal list for '" + name + "'");
    }
    attr.kind = FeatureKind::Nominal;
    for (const auto& v : split_quoted(type.substr(1, close - 1), ',')) attr.values.push_back(unquote(v));
    return attr;
  }
  const std::string t = lower(trim(type));
  if (t == "numeric" || t == "real" || t == "integer") return attr;
  throw DataError("unsupported ARFF attribute type '" + std::string(trim(type)) + "' for attribute '" +
                  name + "'");
}

std::string xml_unescape(std::string s) {
  static const std::pair<const char*, const char*> entities[] = {
      {"&lt;", "<"}, {"&gt;", ">"}, {"&quot;", "\""}, {"&apos;", "'"}, {"&amp;", "&"}};
  for (const auto& [from, to] : entities) {
    std::string::size_type pos = 0;
    const std::string f(from);
    while ((pos = s.find(f, pos)) != std::string::npos) {
      s.replace(pos, f.size(), to);
      pos += std::string(to).size();
    }
  }
  return s;
}

std::vector<std::string> read_xml_labels(std::istream& xml) {
  std::stringstream buf;
  buf << xml.rdbuf();
  const std::string text = buf.str();
  static const std::regex label_re(R"re(<\s*label\b[^>]*?\bname\s*=\s*("([^"]*)"|'([^']*)'))re");
  std::vector<std::string> labels;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), label_re); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    labels.push_back(xml_unescape(m[2].matched ? m[2].str() : m[3].str()));
  }
  return labels;
}

}  // namespace

MultiLabelDataset read_mulan(std::istream& arff, std::istream& xml, std::string name) {
  const std::vector<std::string> label_list = read_xml_labels(xml);
  if (label_list.empty()) throw DataError("XML label list declares no labels");

  std::vector<Attribute> attrs;
  std::vector<std::vector<std::optional<std::string>>> rows;
  bool in_data = false;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(arff, raw)) {
    ++line;
    std::string_view s = trim(raw);
    if (s.empty() || s.front() == '%') continue;
    if (!in_data) {
      if (s.front() != '@') throw DataError("ARFF line " + std::to_string(line) + ": expected a declaration");
      const auto space = s.find_first_of(" \t");
      const std::string keyword = lower(s.substr(0, space));
      const std::string_view body = space == std::string_view::npos ? std::string_view{} : s.substr(space);
      if (keyword == "@relation") {
        continue;
      } else if (keyword == "@attribute") {
        attrs.push_back(parse_attribute(body, line));
      } else if (keyword == "@data") {
        in_data = true;
      } else {
        throw DataError("ARFF line " + std::to_string(line) + ": unknown declaration '" + keyword + "'");
      }
      continue;
    }

    std::vector<std::optional<std::string>> row(attrs.size());
    if (s.front() == '{') {
      const auto close = s.find('}');
      if (close == std::string_view::npos) {
        throw DataError("ARFF line " + std::to_string(line) + ": unterminated sparse instance");
      }
      // Omitted sparse entries are zero: 0 for numeric, the first declared value for nominal.
      for (std::size_t a = 0; a < attrs.size(); ++a) {
        row[a] = attrs[a].kind == FeatureKind::Numeric
                     ? std::string("0")
                     : (attrs[a].values.empty() ? std::string() : attrs[a].values.front());
      }
      const std::string_view inner = trim(s.substr(1, close - 1));
      if (!inner.empty()) {
        for (const auto& entry : split_quoted(inner, ',')) {
          const std::string_view e = trim(entry);
          const auto sp = e.find_first_of(" \t");
          if (sp == std::string_view::npos) {
            throw DataError("ARFF line " + std::to_string(line) + ": malformed sparse entry '" + std::string(e) + "'");
          }
          std::size_t index = 0;
          const std::string idx_text(e.substr(0, sp));
          try {
            std::size_t used = 0;
            index = std::stoul(idx_text, &used);
            if (used != idx_text.size()) throw std::invalid_argument("trailing");
          } catch (const std::exception&) {
            throw DataError("ARFF line " + std::to_string(line) + ": bad sparse index '" + idx_text + "'");
          }
          if (index >= attrs.size()) {
            throw DataError("ARFF line " + std::to_string(line) + ": sparse index " + idx_text + " out of range");
          }
          const std::string value = unquote(e.substr(sp));
          row[index] = value == "?" ? std::nullopt : std::optional<std::string>(value);
        }
      }
    } else {
      const auto cells = split_quoted(s, ',');
      if (cells.size() != attrs.size()) {
        throw DataError("ARFF line " + std::to_string(line) + ": " + std::to_string(cells.size()) +
                        " values, expected " + std::to_string(attrs.size()));
      }
      for (std::size_t a = 0; a < attrs.size(); ++a) {
        const std::string value = unquote(cells[a]);
        row[a] = value == "?" ? std::nullopt : std::optional<std::string>(value);
      }
    }
    rows.push_back(std::move(row));
  }
  if (!in_data) throw DataError("ARFF file has no @data section");

  std::map<std::string, std::size_t> attr_index;
  for (std::size_t a = 0; a < attrs.size(); ++a) {
    if (!attr_index.emplace(attrs[a].name, a).second) {
      throw DataError("duplicate ARFF attribute '" + attrs[a].name + "'");
    }
  }
  std::vector<bool> is_label(attrs.size(), false);
  for (const auto& l : label_list) {
    auto it = attr_index.find(l);
    if (it == attr_index.end()) throw DataError("label '" + l + "' listed in XML is not an ARFF attribute");
    const Attribute& attr = attrs[it->second];
    const bool binary = attr.kind == FeatureKind::Nominal &&
                        std::all_of(attr.values.begin(), attr.values.end(),
                                    [](const std::string& v) { return v == "0" || v == "1"; });
    if (!binary) throw DataError("label attribute '" + l + "' must be nominal {0,1}");
    is_label[it->second] = true;
  }

  const std::size_t n = rows.size();
  std::vector<std::string> label_names;
  std::vector<std::size_t> label_attrs;
  std::vector<FeatureColumn> features;
  for (std::size_t a = 0; a < attrs.size(); ++a) {
    if (is_label[a]) {
      label_names.push_back(attrs[a].name);
      label_attrs.push_back(a);
      continue;
    }
    FeatureColumn col{attrs[a].name, attrs[a].kind, {}, {}};
    for (std::size_t r = 0; r < n; ++r) {
      const auto& cell = rows[r][a];
      if (attrs[a].kind == FeatureKind::Numeric) {
        if (!cell) {
          col.numeric.emplace_back(std::nullopt);
          continue;
        }
        auto v = csv::parse_double(*cell);
        if (!v) {
          throw DataError("ARFF data row " + std::to_string(r + 1) + ", attribute '" + attrs[a].name +
                          "': '" + *cell + "' is not numeric");
        }
        col.numeric.emplace_back(v);
      } else {
        if (cell && std::find(attrs[a].values.begin(), attrs[a].values.end(), *cell) == attrs[a].values.end()) {
          throw DataError("ARFF data row " + std::to_string(r + 1) + ", attribute '" + attrs[a].name +
                          "': undeclared nominal value '" + *cell + "'");
        }
        col.nominal.push_back(cell);
      }
    }
    features.push_back(std::move(col));
  }

  LabelMatrix labels(label_names, n);
  for (std::size_t j = 0; j < label_attrs.size(); ++j) {
    for (std::size_t r = 0; r < n; ++r) {
      const auto& cell = rows[r][label_attrs[j]];
      if (!cell || (*cell != "0" && *cell != "1")) {
        throw DataError("ARFF data row " + std::to_string(r + 1) + ", label '" + label_names[j] +
                        "': value must be 0 or 1");
      }
      if (*cell == "1") labels.set(r, j, true);
    }
  }
  return MultiLabelDataset{std::move(name), FeatureMatrix(n, std::move(features)), std::move(labels)};
}

MultiLabelDataset load_mulan(const std::filesystem::path& arff_path, const std::filesystem::path& xml_path) {
  std::ifstream arff(arff_path);
  if (!arff) throw DataError("cannot open '" + arff_path.string() + "'");
  std::ifstream xml(xml_path);
  if (!xml) throw DataError("cannot open '" + xml_path.string() + "'");
  return read_mulan(arff, xml, arff_path.stem().string());
}

}  // namespace entailnet
