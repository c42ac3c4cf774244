#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "jointbe/minifem.hpp"
#include "jointbe/rom.hpp"
#include "jointbe/types.hpp"

namespace jointbe {

/// Key-value text with [section] headers, '#' or ';' comments and
/// `key = value` lines. Every lookup is tracked so unknown keys can be reported
/// with their line.
class ConfigFile {
 public:
  static ConfigFile parse(std::string_view text, std::string source = "<config>");
  static ConfigFile load(const std::filesystem::path& path);

  const std::string& source() const { return source_; }
  std::filesystem::path base_directory() const { return base_; }
  bool has_section(const std::string& section) const;
  bool has(const std::string& section, const std::string& key) const;

  std::string get_string(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  int get_int(const std::string& section, const std::string& key) const;
  int get_int(const std::string& section, const std::string& key, int fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& section, const std::string& key) const;
  std::vector<int> get_ints(const std::string& section, const std::string& key) const;
  /// Relative paths resolve against the config file's directory.
  std::filesystem::path get_path(const std::string& section, const std::string& key) const;

  /// Throws Error(config) naming the first key that was never read.
  void check_all_used() const;
  /// Sorted `section.key=value` lines; equal iff the configurations are.
  std::string canonical() const;

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };
  const Entry& entry(const std::string& section, const std::string& key) const;
  [[noreturn]] void fail(const std::string& section, const std::string& key, const std::string& why) const;

  std::string source_;
  std::filesystem::path base_;
  std::map<std::pair<std::string, std::string>, Entry> entries_;
  std::set<std::string> sections_;
  mutable std::set<std::pair<std::string, std::string>> used_;
};

/// Matrix Market "coordinate real" files, symmetric (lower triangle stored) or
/// general. General input must be symmetric to 1e-12 relative and is then
/// averaged. Errors name the line, row and column.
SpMat read_matrix_market(const std::filesystem::path& path);
void write_matrix_market(const std::filesystem::path& path, const SpMat& symmetric);

/// DOF map sidecar `dof_id,node_id,direction` with direction in {x, y, z};
/// every DOF 0..n-1 must appear exactly once.
std::vector<DofInfo> read_dof_map(const std::filesystem::path& path, int n_dofs);
void write_dof_map(const std::filesystem::path& path, const std::vector<DofInfo>& dofs);

/// External FE model bundle: mass.mtx, stiffness.mtx, dofs.csv,
/// interface_nodes.csv (node_id,x,y,dof_x,dof_y,dof_z), interface_faces.csv
/// (n1,n2,n3,n4) and loads.csv (name,dof_id,value). The interface DOFs are the
/// boundary set, in node order, and are read as relative coordinates.
struct FeModelFiles {
  std::filesystem::path mass;
  std::filesystem::path stiffness;
  std::filesystem::path dof_map;
  std::filesystem::path interface_nodes;
  std::filesystem::path interface_faces;
  std::filesystem::path loads;  // optional
  static FeModelFiles in_directory(const std::filesystem::path& dir);
};

struct ExternalModel {
  FeModel model;
  InterfaceMesh interface;
};

ExternalModel load_fe_model(const FeModelFiles& files);
/// Writes a fixture in the same layout (model coordinates, no to_physical).
void export_fe_model(const std::filesystem::path& dir, const FixtureModel& fixture);

/// SHA-256 of a string as lowercase hex.
std::string sha256_hex(std::string_view data);

/// Wall and CPU seconds per named phase, in insertion order.
class PhaseTimer {
 public:
  struct Record {
    std::string phase;
    double wall = 0.0;
    double cpu = 0.0;
  };
  class Scope {
   public:
    Scope(PhaseTimer& t, std::string phase);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    PhaseTimer& timer_;
    std::string phase_;
    double wall0_;
    double cpu0_;
  };
  Scope scope(std::string phase) { return Scope(*this, std::move(phase)); }
  void add(const std::string& phase, double wall, double cpu);
  const std::vector<Record>& records() const { return records_; }

 private:
  std::vector<Record> records_;
};

}  // namespace jointbe
