#include "jointbe/io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "jointbe/csv.hpp"
#include "jointbe/error.hpp"

namespace jointbe {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool parse_double(const std::string& s, double& out) {
  const char* b = s.c_str();
  char* end = nullptr;
  out = std::strtod(b, &end);
  return end != b && trim(std::string_view(end)).empty();
}

}  // namespace

// ---------------------------------------------------------------- config

ConfigFile ConfigFile::parse(std::string_view text, std::string source) {
  ConfigFile cfg;
  cfg.source_ = std::move(source);
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  auto error = [&](const std::string& why) {
    throw Error(ErrorCategory::config, cfg.source_ + ":" + std::to_string(line) + ": " + why);
  };
  while (std::getline(in, raw)) {
    ++line;
    std::string s = raw;
    for (const char* mark : {" #", "\t#", " ;", "\t;"}) {
      const auto p = s.find(mark);
      if (p != std::string::npos) s.erase(p);
    }
    s = trim(s);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']') error("unterminated section header");
      section = lower(trim(s.substr(1, s.size() - 2)));
      if (section.empty()) error("empty section name");
      cfg.sections_.insert(section);
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) error("expected 'key = value'");
    if (section.empty()) error("key outside of any [section]");
    const std::string key = lower(trim(s.substr(0, eq)));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty()) error("empty key");
    const auto k = std::make_pair(section, key);
    if (auto it = cfg.entries_.find(k); it != cfg.entries_.end()) {
      error("duplicate field '" + section + "." + key + "' (first set on line " + std::to_string(it->second.line) + ")");
    }
    cfg.entries_[k] = {value, line};
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  ConfigFile cfg = parse(ss.str(), path.string());
  cfg.base_ = path.parent_path();
  return cfg;
}

bool ConfigFile::has_section(const std::string& section) const { return sections_.count(section) > 0; }

bool ConfigFile::has(const std::string& section, const std::string& key) const {
  return entries_.count({section, key}) > 0;
}

void ConfigFile::fail(const std::string& section, const std::string& key, const std::string& why) const {
  const auto it = entries_.find({section, key});
  std::string where = source_;
  if (it != entries_.end()) where += ":" + std::to_string(it->second.line);
  throw Error(ErrorCategory::config, where + ": field '" + section + "." + key + "' " + why);
}

const ConfigFile::Entry& ConfigFile::entry(const std::string& section, const std::string& key) const {
  const auto it = entries_.find({section, key});
  if (it == entries_.end()) fail(section, key, "is required but missing");
  used_.insert({section, key});
  return it->second;
}

std::string ConfigFile::get_string(const std::string& section, const std::string& key) const {
  return entry(section, key).value;
}

std::string ConfigFile::get_string(const std::string& section, const std::string& key,
                                   const std::string& fallback) const {
  return has(section, key) ? get_string(section, key) : fallback;
}

double ConfigFile::get_double(const std::string& section, const std::string& key) const {
  const auto& e = entry(section, key);
  double v = 0.0;
  if (!parse_double(e.value, v) || !std::isfinite(v)) fail(section, key, "must be a finite number, got '" + e.value + "'");
  return v;
}

double ConfigFile::get_double(const std::string& section, const std::string& key, double fallback) const {
  return has(section, key) ? get_double(section, key) : fallback;
}

int ConfigFile::get_int(const std::string& section, const std::string& key) const {
  const double v = get_double(section, key);
  if (v != std::floor(v) || std::abs(v) > 2e9) fail(section, key, "must be an integer");
  return static_cast<int>(v);
}

int ConfigFile::get_int(const std::string& section, const std::string& key, int fallback) const {
  return has(section, key) ? get_int(section, key) : fallback;
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = lower(entry(section, key).value);
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  fail(section, key, "must be true or false, got '" + v + "'");
}

std::vector<double> ConfigFile::get_doubles(const std::string& section, const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split_list(entry(section, key).value)) {
    double v = 0.0;
    if (!parse_double(item, v) || !std::isfinite(v)) fail(section, key, "has a non-numeric list item '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<int> ConfigFile::get_ints(const std::string& section, const std::string& key) const {
  std::vector<int> out;
  for (double v : get_doubles(section, key)) {
    if (v != std::floor(v)) fail(section, key, "must list integers");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::filesystem::path ConfigFile::get_path(const std::string& section, const std::string& key) const {
  std::filesystem::path p = get_string(section, key);
  if (p.is_relative()) p = base_ / p;
  return p;
}

void ConfigFile::check_all_used() const {
  for (const auto& [k, e] : entries_) {
    if (!used_.count(k)) {
      throw Error(ErrorCategory::config,
                  source_ + ":" + std::to_string(e.line) + ": unknown field '" + k.first + "." + k.second + "'");
    }
  }
}

std::string ConfigFile::canonical() const {
  std::string out;
  for (const auto& [k, e] : entries_) out += k.first + "." + k.second + "=" + e.value + "\n";
  return out;
}

// ---------------------------------------------------------------- matrix market

SpMat read_matrix_market(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot open matrix file " + path.string());
  const std::string name = path.string();
  auto fail = [&](int line, const std::string& why) -> void {
    throw Error(ErrorCategory::input, name + ":" + std::to_string(line) + ": " + why);
  };
  std::string raw;
  int line = 1;
  if (!std::getline(in, raw)) fail(1, "empty file");
  std::istringstream head(lower(raw));
  std::string banner, object, format, field, symmetry;
  head >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%matrixmarket" || object != "matrix" || format != "coordinate" || field != "real" ||
      (symmetry != "symmetric" && symmetry != "general")) {
    fail(1, "malformed header; expected '%%MatrixMarket matrix coordinate real symmetric|general'");
  }
  const bool symmetric = symmetry == "symmetric";
  long rows = -1, cols = -1, nnz = -1;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(raw);
    if (s.empty() || s[0] == '%') continue;
    std::istringstream sz(s);
    if (!(sz >> rows >> cols >> nnz) || rows < 1 || cols < 1 || nnz < 0) fail(line, "malformed size line");
    break;
  }
  if (rows < 0) fail(line, "missing size line");
  if (rows != cols) fail(line, "matrix is not square");
  std::vector<Eigen::Triplet<double>> trip;
  long count = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(raw);
    if (s.empty() || s[0] == '%') continue;
    std::istringstream es(s);
    long i = 0, j = 0;
    std::string vs;
    if (!(es >> i >> j >> vs)) fail(line, "malformed entry");
    double v = 0.0;
    if (!parse_double(vs, v)) fail(line, "malformed value '" + vs + "'");
    if (i < 1 || i > rows || j < 1 || j > cols) {
      fail(line, "index (" + std::to_string(i) + ", " + std::to_string(j) + ") out of bounds");
    }
    if (!std::isfinite(v)) fail(line, "non-finite value at row " + std::to_string(i) + ", column " + std::to_string(j));
    trip.emplace_back(static_cast<int>(i - 1), static_cast<int>(j - 1), v);
    if (symmetric && i != j) trip.emplace_back(static_cast<int>(j - 1), static_cast<int>(i - 1), v);
    ++count;
  }
  if (count != nnz) fail(line, "expected " + std::to_string(nnz) + " entries, found " + std::to_string(count));
  SpMat m(static_cast<int>(rows), static_cast<int>(cols));
  m.setFromTriplets(trip.begin(), trip.end());
  if (!symmetric) {
    const SpMat t = m.transpose();
    const SpMat d = m - t;
    double worst = 0.0, scale = 0.0;
    int wi = 0, wj = 0;
    for (int k = 0; k < m.outerSize(); ++k) {
      for (SpMat::InnerIterator it(m, k); it; ++it) scale = std::max(scale, std::abs(it.value()));
    }
    for (int k = 0; k < d.outerSize(); ++k) {
      for (SpMat::InnerIterator it(d, k); it; ++it) {
        if (std::abs(it.value()) > worst) {
          worst = std::abs(it.value());
          wi = static_cast<int>(it.row());
          wj = static_cast<int>(it.col());
        }
      }
    }
    if (worst > 1e-12 * scale) {
      std::ostringstream msg;
      msg << name << ": matrix is not symmetric; worst mismatch " << worst << " at row " << wi + 1 << ", column "
          << wj + 1;
      throw Error(ErrorCategory::input, msg.str());
    }
    m = 0.5 * (m + t);
  }
  m.makeCompressed();
  return m;
}

void write_matrix_market(const std::filesystem::path& path, const SpMat& a) {
  auto out = csv::open_output(path);
  std::vector<std::tuple<int, int, double>> lower_entries;
  for (int k = 0; k < a.outerSize(); ++k) {
    for (SpMat::InnerIterator it(a, k); it; ++it) {
      if (it.row() >= it.col() && it.value() != 0.0) lower_entries.emplace_back(it.row(), it.col(), it.value());
    }
  }
  std::sort(lower_entries.begin(), lower_entries.end(), [](const auto& x, const auto& y) {
    return std::tie(std::get<1>(x), std::get<0>(x)) < std::tie(std::get<1>(y), std::get<0>(y));
  });
  out << "%%MatrixMarket matrix coordinate real symmetric\n";
  out << a.rows() << ' ' << a.cols() << ' ' << lower_entries.size() << '\n';
  for (const auto& [i, j, v] : lower_entries) out << i + 1 << ' ' << j + 1 << ' ' << csv::sci(v) << '\n';
}

std::vector<DofInfo> read_dof_map(const std::filesystem::path& path, int n_dofs) {
  const auto t = csv::read(path, {"dof_id", "node_id", "direction"});
  std::vector<DofInfo> dofs(static_cast<std::size_t>(n_dofs));
  std::vector<int> seen(static_cast<std::size_t>(n_dofs), 0);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const int line = t.line_numbers[r];
    const long id = csv::to_long(t.rows[r][0], path, line);
    if (id < 0 || id >= n_dofs) {
      throw Error(ErrorCategory::input, path.string() + ":" + std::to_string(line) + ": DOF id out of range");
    }
    if (seen[static_cast<std::size_t>(id)]++) {
      throw Error(ErrorCategory::input, path.string() + ":" + std::to_string(line) + ": DOF " + std::to_string(id) + " listed twice");
    }
    DofInfo& d = dofs[static_cast<std::size_t>(id)];
    d.node = static_cast<int>(csv::to_long(t.rows[r][1], path, line));
    const std::string dir = lower(t.rows[r][2]);
    if (dir == "x" || dir == "0") d.direction = 0;
    else if (dir == "y" || dir == "1") d.direction = 1;
    else if (dir == "z" || dir == "2") d.direction = 2;
    else throw Error(ErrorCategory::input, path.string() + ":" + std::to_string(line) + ": direction must be x, y or z");
  }
  for (int i = 0; i < n_dofs; ++i) {
    if (!seen[static_cast<std::size_t>(i)]) {
      throw Error(ErrorCategory::input, path.string() + ": DOF map gap, DOF " + std::to_string(i) + " is missing");
    }
  }
  return dofs;
}

void write_dof_map(const std::filesystem::path& path, const std::vector<DofInfo>& dofs) {
  auto out = csv::open_output(path);
  out << "dof_id,node_id,direction\n";
  const char* names = "xyz";
  for (std::size_t i = 0; i < dofs.size(); ++i) {
    const int dir = dofs[i].direction;
    out << i << ',' << dofs[i].node << ',' << (dir >= 0 && dir < 3 ? names[dir] : 'x') << '\n';
  }
}

FeModelFiles FeModelFiles::in_directory(const std::filesystem::path& dir) {
  return {dir / "mass.mtx",           dir / "stiffness.mtx",       dir / "dofs.csv",
          dir / "interface_nodes.csv", dir / "interface_faces.csv", dir / "loads.csv"};
}

ExternalModel load_fe_model(const FeModelFiles& files) {
  ExternalModel em;
  FeModel& m = em.model;
  m.mass = read_matrix_market(files.mass);
  m.stiffness = read_matrix_market(files.stiffness);
  if (m.mass.rows() != m.stiffness.rows()) throw Error(ErrorCategory::input, "FE model: mass and stiffness sizes differ");
  const int n = static_cast<int>(m.mass.rows());
  m.dofs = read_dof_map(files.dof_map, n);

  const auto nodes = csv::read(files.interface_nodes, {"node_id", "x", "y", "dof_x", "dof_y", "dof_z"});
  std::map<long, int> node_index;
  for (std::size_t r = 0; r < nodes.rows.size(); ++r) {
    const int line = nodes.line_numbers[r];
    const auto& row = nodes.rows[r];
    const long id = csv::to_long(row[0], files.interface_nodes, line);
    if (node_index.count(id)) {
      throw Error(ErrorCategory::input, files.interface_nodes.string() + ":" + std::to_string(line) + ": duplicate node id");
    }
    node_index[id] = static_cast<int>(em.interface.node_xy.size());
    em.interface.node_xy.push_back({csv::to_double(row[1], files.interface_nodes, line),
                                    csv::to_double(row[2], files.interface_nodes, line)});
    std::array<int, 3> d{};
    for (int c = 0; c < 3; ++c) {
      const long v = csv::to_long(row[static_cast<std::size_t>(3 + c)], files.interface_nodes, line);
      if (v < -1 || v >= n) {
        throw Error(ErrorCategory::input, files.interface_nodes.string() + ":" + std::to_string(line) + ": DOF out of range");
      }
      d[static_cast<std::size_t>(c)] = static_cast<int>(v);
      if (v >= 0) m.boundary_dofs.push_back(static_cast<int>(v));
    }
    em.interface.node_dofs.push_back(d);
  }
  const auto faces = csv::read(files.interface_faces, {"n1", "n2", "n3", "n4"});
  for (std::size_t r = 0; r < faces.rows.size(); ++r) {
    const int line = faces.line_numbers[r];
    std::array<int, 4> f{};
    for (int c = 0; c < 4; ++c) {
      const long id = csv::to_long(faces.rows[r][static_cast<std::size_t>(c)], files.interface_faces, line);
      const auto it = node_index.find(id);
      if (it == node_index.end()) {
        throw Error(ErrorCategory::input, files.interface_faces.string() + ":" + std::to_string(line) +
                                              ": face refers to unknown node " + std::to_string(id));
      }
      f[static_cast<std::size_t>(c)] = it->second;
    }
    em.interface.faces.push_back(f);
  }
  if (!files.loads.empty() && std::filesystem::exists(files.loads)) {
    const auto loads = csv::read(files.loads, {"name", "dof_id", "value"});
    for (std::size_t r = 0; r < loads.rows.size(); ++r) {
      const int line = loads.line_numbers[r];
      const long dof = csv::to_long(loads.rows[r][1], files.loads, line);
      if (dof < 0 || dof >= n) throw Error(ErrorCategory::input, files.loads.string() + ":" + std::to_string(line) + ": DOF out of range");
      auto& f = m.loads[loads.rows[r][0]];
      if (f.size() == 0) f = Vec::Zero(n);
      f(dof) += csv::to_double(loads.rows[r][2], files.loads, line);
    }
  }
  m.validate();
  return em;
}

void export_fe_model(const std::filesystem::path& dir, const FixtureModel& fixture) {
  std::filesystem::create_directories(dir);
  const FeModelFiles f = FeModelFiles::in_directory(dir);
  write_matrix_market(f.mass, fixture.model.mass);
  write_matrix_market(f.stiffness, fixture.model.stiffness);
  write_dof_map(f.dof_map, fixture.model.dofs);
  {
    auto out = csv::open_output(f.interface_nodes);
    out << "node_id,x,y,dof_x,dof_y,dof_z\n";
    const auto& im = fixture.interface;
    for (std::size_t i = 0; i < im.node_xy.size(); ++i) {
      out << i << ',' << csv::sci(im.node_xy[i].x) << ',' << csv::sci(im.node_xy[i].y);
      for (int d : im.node_dofs[i]) out << ',' << d;
      out << '\n';
    }
  }
  {
    auto out = csv::open_output(f.interface_faces);
    out << "n1,n2,n3,n4\n";
    for (const auto& face : fixture.interface.faces) out << face[0] << ',' << face[1] << ',' << face[2] << ',' << face[3] << '\n';
  }
  {
    auto out = csv::open_output(f.loads);
    out << "name,dof_id,value\n";
    for (const auto& [name, v] : fixture.model.loads) {
      for (int i = 0; i < v.size(); ++i) {
        if (v(i) != 0.0) out << name << ',' << i << ',' << csv::sci(v(i)) << '\n';
      }
    }
  }
}

// ---------------------------------------------------------------- misc

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCategory::numerical, "sha256 failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return out.str();
}

namespace {
double wall_now() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}
double cpu_now() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }
}  // namespace

PhaseTimer::Scope::Scope(PhaseTimer& t, std::string phase)
    : timer_(t), phase_(std::move(phase)), wall0_(wall_now()), cpu0_(cpu_now()) {}

PhaseTimer::Scope::~Scope() { timer_.add(phase_, wall_now() - wall0_, cpu_now() - cpu0_); }

void PhaseTimer::add(const std::string& phase, double wall, double cpu) {
  for (auto& r : records_) {
    if (r.phase == phase) {
      r.wall += wall;
      r.cpu += cpu;
      return;
    }
  }
  records_.push_back({phase, wall, cpu});
}

}  // namespace jointbe
