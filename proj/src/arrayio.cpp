#include "cycleflow/arrayio.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cycleflow {

static constexpr const char* kMagic = "cycleflow-arrays v1";

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw std::runtime_error("arrayio: bad number '" + s + "'");
  return v;
}

void ArrayFile::set_meta(const std::string& key, const std::string& value) {
  for (auto& kv : meta)
    if (kv.first == key) {
      kv.second = value;
      return;
    }
  meta.emplace_back(key, value);
}

void ArrayFile::set_meta_int(const std::string& key, long long value) {
  set_meta(key, std::to_string(value));
}

void ArrayFile::set_meta_double(const std::string& key, double value) {
  set_meta(key, format_double(value));
}

const std::string& ArrayFile::get_meta(const std::string& key) const {
  for (const auto& kv : meta)
    if (kv.first == key) return kv.second;
  throw std::runtime_error("arrayio: missing meta key '" + key + "'");
}

long long ArrayFile::get_meta_int(const std::string& key) const {
  return std::stoll(get_meta(key));
}

double ArrayFile::get_meta_double(const std::string& key) const {
  return parse_double(get_meta(key));
}

bool ArrayFile::has_meta(const std::string& key) const {
  for (const auto& kv : meta)
    if (kv.first == key) return true;
  return false;
}

void ArrayFile::add_array(const std::string& name, const Eigen::MatrixXd& m) {
  for (const auto& kv : arrays)
    if (kv.first == name) throw std::runtime_error("arrayio: duplicate array '" + name + "'");
  arrays.emplace_back(name, m);
}

const Eigen::MatrixXd& ArrayFile::get_array(const std::string& name) const {
  for (const auto& kv : arrays)
    if (kv.first == name) return kv.second;
  throw std::runtime_error("arrayio: missing array '" + name + "'");
}

bool ArrayFile::has_array(const std::string& name) const {
  for (const auto& kv : arrays)
    if (kv.first == name) return true;
  return false;
}

std::string serialize_array_file(const ArrayFile& f) {
  std::string out;
  out += kMagic;
  out += '\n';
  for (const auto& kv : f.meta) {
    out += "meta ";
    out += kv.first;
    out += ' ';
    out += kv.second;
    out += '\n';
  }
  for (const auto& kv : f.arrays) {
    const Eigen::MatrixXd& m = kv.second;
    out += "array ";
    out += kv.first;
    out += ' ';
    out += std::to_string(m.rows());
    out += ' ';
    out += std::to_string(m.cols());
    out += '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (c) out += ' ';
        out += format_double(m(r, c));
      }
      out += '\n';
    }
  }
  out += "end\n";
  return out;
}

ArrayFile deserialize_array_file(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kMagic)
    throw std::runtime_error("arrayio: bad or unsupported header (expected '" +
                             std::string(kMagic) + "')");
  ArrayFile f;
  bool saw_end = false;
  while (std::getline(in, line)) {
    if (line == "end") {
      saw_end = true;
      break;
    }
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "meta") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      f.meta.emplace_back(key, value);
    } else if (tag == "array") {
      std::string name;
      long long rows = -1, cols = -1;
      ls >> name >> rows >> cols;
      if (name.empty() || rows < 0 || cols < 0)
        throw std::runtime_error("arrayio: corrupt array header '" + line + "'");
      Eigen::MatrixXd m(rows, cols);
      for (long long r = 0; r < rows; ++r) {
        if (!std::getline(in, line))
          throw std::runtime_error("arrayio: truncated file in array '" + name + "'");
        std::istringstream row(line);
        std::string tok;
        for (long long c = 0; c < cols; ++c) {
          if (!(row >> tok))
            throw std::runtime_error("arrayio: short row in array '" + name + "'");
          m(r, c) = parse_double(tok);
        }
      }
      f.add_array(name, m);
    } else if (tag.empty()) {
      continue;
    } else {
      throw std::runtime_error("arrayio: unknown tag '" + tag + "'");
    }
  }
  if (!saw_end) throw std::runtime_error("arrayio: corrupt file (missing end marker)");
  return f;
}

void write_array_file(const ArrayFile& f, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("arrayio: cannot open '" + path + "' for writing");
  const std::string s = serialize_array_file(f);
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!out) throw std::runtime_error("arrayio: write failed for '" + path + "'");
}

ArrayFile read_array_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("arrayio: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_array_file(ss.str());
}

}  // namespace cycleflow
