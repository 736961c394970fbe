#pragma once

#include <map>
#include <string>
#include <vector>
#include <Eigen/Core>

namespace cycleflow {

// Self-describing container of named float64 arrays plus string metadata.
// Text format, one construct per line:
//
//   cycleflow-arrays v1
//   meta <key> <value...>
//   array <name> <rows> <cols>
//   <cols numbers per row, row-major, shortest round-trip decimal>
//   end
//
// Doubles are written with std::to_chars and read with std::from_chars, so a
// write -> read -> write cycle is byte-identical.
struct ArrayFile {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::pair<std::string, Eigen::MatrixXd>> arrays;

  void set_meta(const std::string& key, const std::string& value);
  void set_meta_int(const std::string& key, long long value);
  void set_meta_double(const std::string& key, double value);
  const std::string& get_meta(const std::string& key) const;
  long long get_meta_int(const std::string& key) const;
  double get_meta_double(const std::string& key) const;
  bool has_meta(const std::string& key) const;

  void add_array(const std::string& name, const Eigen::MatrixXd& m);
  const Eigen::MatrixXd& get_array(const std::string& name) const;
  bool has_array(const std::string& name) const;
};

// Shortest decimal that round-trips exactly under from_chars.
std::string format_double(double x);
double parse_double(const std::string& s);

void write_array_file(const ArrayFile& f, const std::string& path);
ArrayFile read_array_file(const std::string& path);

std::string serialize_array_file(const ArrayFile& f);
ArrayFile deserialize_array_file(const std::string& text);

}  // namespace cycleflow
