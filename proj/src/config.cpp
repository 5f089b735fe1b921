#include "backaction/config.hpp"

#include "backaction/errors.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>

namespace backaction {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos)
    return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) {
    item = trim(item);
    if (!item.empty())
      out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& text) {
  const auto t = trim(text);
  double v = 0.0;
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || end != t.data() + t.size() || t.empty())
    throw ConfigError(key + ": expected a number, got '" + text + "'");
  return v;
}

template <class Int>
Int parse_int(const std::string& key, const std::string& text) {
  const auto t = trim(text);
  Int v{};
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || end != t.data() + t.size() || t.empty())
    throw ConfigError(key + ": expected an integer, got '" + text + "'");
  return v;
}

// Plain numbers or multiples of pi: "pi", "2*pi", "pi/2", "0.5*pi/3".
double parse_wavenumber(const std::string& key, const std::string& text) {
  std::string t;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c)))
      t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  const auto at = t.find("pi");
  if (at == std::string::npos)
    return parse_double(key, t);
  std::string head = t.substr(0, at);
  std::string tail = t.substr(at + 2);
  double value = std::numbers::pi;
  if (!head.empty()) {
    if (head.back() != '*')
      throw ConfigError(key + ": cannot parse '" + text + "'");
    head.pop_back();
    value *= parse_double(key, head);
  }
  if (!tail.empty()) {
    if (tail.front() != '/')
      throw ConfigError(key + ": cannot parse '" + text + "'");
    value /= parse_double(key, tail.substr(1));
  }
  return value;
}

std::string format_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

template <class Int>
std::string format_int(Int v) {
  return std::to_string(v);
}

std::pair<std::size_t, std::size_t> parse_pair(const std::string& key, const std::string& text) {
  const auto x = text.find('x');
  if (x == std::string::npos)
    throw ConfigError(key + ": expected MxN, got '" + text + "'");
  return {parse_int<std::size_t>(key, text.substr(0, x)), parse_int<std::size_t>(key, text.substr(x + 1))};
}

std::string format_pair(std::size_t m, std::size_t n) { return std::to_string(m) + "x" + std::to_string(n); }

struct Field {
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
  bool provenance = true;  // false for execution-only settings
};

// Ordered list of (section, key) with their accessors; the echo follows this order.
const std::vector<std::pair<std::string, Field>>& fields() {
  using C = ExperimentConfig;
  static const std::vector<std::pair<std::string, Field>> table{
      {"physics.sites",
       {[](C& c, const std::string& v) { c.physics.site_count = parse_int<int>("physics.sites", v); },
        [](const C& c) { return format_int(c.physics.site_count); }}},
      {"physics.atoms",
       {[](C& c, const std::string& v) { c.physics.atom_count = parse_int<int>("physics.atoms", v); },
        [](const C& c) { return format_int(c.physics.atom_count); }}},
      {"physics.interaction",
       {[](C& c, const std::string& v) { c.physics.interaction = parse_double("physics.interaction", v); },
        [](const C& c) { return format_double(c.physics.interaction); }}},
      {"physics.hopping",
       {[](C& c, const std::string& v) { c.physics.hopping = parse_double("physics.hopping", v); },
        [](const C& c) { return format_double(c.physics.hopping); }}},
      {"physics.boundary",
       {[](C& c, const std::string& v) {
          const auto t = trim(v);
          if (t == "open")
            c.physics.open_boundary = true;
          else if (t == "periodic")
            c.physics.open_boundary = false;
          else
            throw ConfigError("physics.boundary: expected open or periodic, got '" + v + "'");
        },
        [](const C& c) { return std::string(c.physics.open_boundary ? "open" : "periodic"); }}},
      {"scattering.coupling",
       {[](C& c, const std::string& v) { c.scattering.coupling = parse_double("scattering.coupling", v); },
        [](const C& c) { return format_double(c.scattering.coupling); }}},
      {"scattering.k0",
       {[](C& c, const std::string& v) { c.scattering.k0 = parse_wavenumber("scattering.k0", v); },
        [](const C& c) { return format_double(c.scattering.k0); }}},
      {"scattering.wannier_width",
       {[](C& c, const std::string& v) {
          c.scattering.wannier_width = parse_double("scattering.wannier_width", v);
        },
        [](const C& c) { return format_double(c.scattering.wannier_width); }}},
      {"scattering.quadrature_points",
       {[](C& c, const std::string& v) {
          c.scattering.quadrature_points = parse_int<int>("scattering.quadrature_points", v);
        },
        [](const C& c) { return format_int(c.scattering.quadrature_points); }}},
      {"scattering.site_origin",
       {[](C& c, const std::string& v) { c.scattering.site_origin = parse_double("scattering.site_origin", v); },
        [](const C& c) { return format_double(c.scattering.site_origin); }}},
      {"trajectory.events",
       {[](C& c, const std::string& v) { c.events = parse_int<std::size_t>("trajectory.events", v); },
        [](const C& c) { return format_int(c.events); }}},
      {"trajectory.dt",
       {[](C& c, const std::string& v) { c.dt = parse_double("trajectory.dt", v); },
        [](const C& c) { return format_double(c.dt); }}},
      {"trajectory.snapshot_stride",
       {[](C& c, const std::string& v) {
          c.snapshot_stride = parse_int<std::size_t>("trajectory.snapshot_stride", v);
        },
        [](const C& c) { return format_int(c.snapshot_stride); }}},
      {"ensemble.runs",
       {[](C& c, const std::string& v) { c.runs = parse_int<std::size_t>("ensemble.runs", v); },
        [](const C& c) { return format_int(c.runs); }}},
      {"ensemble.bins",
       {[](C& c, const std::string& v) { c.bins = parse_int<std::size_t>("ensemble.bins", v); },
        [](const C& c) { return format_int(c.bins); }}},
      {"ensemble.master_seed",
       {[](C& c, const std::string& v) { c.master_seed = parse_int<std::uint64_t>("ensemble.master_seed", v); },
        [](const C& c) { return format_int(c.master_seed); }}},
      {"ensemble.workers",
       {[](C& c, const std::string& v) { c.workers = parse_int<std::size_t>("ensemble.workers", v); },
        [](const C& c) { return format_int(c.workers); }, false}},
      {"output.directory",
       {[](C& c, const std::string& v) { c.output.directory = trim(v); },
        [](const C& c) { return c.output.directory; }, false}},
      {"output.formats",
       {[](C& c, const std::string& v) {
          c.output.json = false;
          c.output.svg = false;
          for (const auto& f : split(v, ',')) {
            if (f == "json")
              c.output.json = true;
            else if (f == "svg")
              c.output.svg = true;
            else if (f != "csv")
              throw ConfigError("output.formats: unknown format '" + f + "'");
          }
        },
        [](const C& c) {
          std::string s = "csv";
          if (c.output.json)
            s += ",json";
          if (c.output.svg)
            s += ",svg";
          return s;
        },
        false}},
      {"initial.source",
       {[](C& c, const std::string& v) { c.initial = trim(v); }, [](const C& c) { return c.initial; }}},
      {"study.interaction_b",
       {[](C& c, const std::string& v) { c.study.interaction_b = parse_double("study.interaction_b", v); },
        [](const C& c) { return format_double(c.study.interaction_b); }}},
      {"study.pairs",
       {[](C& c, const std::string& v) {
          c.study.pairs.clear();
          for (const auto& item : split(v, ','))
            c.study.pairs.push_back(parse_pair("study.pairs", item));
        },
        [](const C& c) {
          std::string s;
          for (const auto& [m, n] : c.study.pairs)
            s += (s.empty() ? "" : ",") + format_pair(m, n);
          return s;
        }}},
      {"study.cases",
       {[](C& c, const std::string& v) {
          c.study.cases.clear();
          for (const auto& item : split(v, ',')) {
            const auto colon = item.find(':');
            if (colon == std::string::npos)
              throw ConfigError("study.cases: expected dt:MxN, got '" + item + "'");
            const auto [m, n] = parse_pair("study.cases", item.substr(colon + 1));
            c.study.cases.push_back({parse_double("study.cases", item.substr(0, colon)), m, n});
          }
        },
        [](const C& c) {
          std::string s;
          for (const auto& k : c.study.cases)
            s += (s.empty() ? "" : ",") + format_double(k.dt) + ":" + format_pair(k.events_per_run, k.runs);
          return s;
        }}},
  };
  return table;
}

const Field* find_field(const std::string& dotted) {
  for (const auto& [name, field] : fields())
    if (name == dotted)
      return &field;
  return nullptr;
}

} // namespace

ExperimentConfig::ExperimentConfig() { physics.interaction = 0.05; }

TrajectoryConfig ExperimentConfig::trajectory_config() const {
  TrajectoryConfig t;
  t.event_count = events;
  t.dt = dt;
  t.snapshot_stride = snapshot_stride;
  t.rng_seed = derive_seed(master_seed, 0);
  return t;
}

EnsembleConfig ExperimentConfig::ensemble_config() const {
  EnsembleConfig e;
  e.run_count = runs;
  e.trajectory = trajectory_config();
  e.trajectory.record_overlaps = false;
  e.trajectory.snapshot_stride = 0;
  e.bin_count = bins;
  e.master_seed = master_seed;
  e.worker_count = workers;
  return e;
}

void ExperimentConfig::validate() const {
  physics.validate();
  const auto dim = basis_dimension(physics.site_count, physics.atom_count);
  if (dim == 0 || dim > kDefaultBasisCap)
    throw DimensionOverflowError("basis for M=" + std::to_string(physics.site_count) +
                                 ", N=" + std::to_string(physics.atom_count) + " exceeds the cap of " +
                                 std::to_string(kDefaultBasisCap) + " states");
  scattering.validate();
  ensemble_config().validate();
  if (output.directory.empty())
    throw ConfigError("output.directory must not be empty");
  if (initial.empty())
    throw ConfigError("initial.source must be 'ground' or a path");
  if (!(study.interaction_b >= 0.0) || !std::isfinite(study.interaction_b))
    throw ConfigError("study.interaction_b must be >= 0");
  for (const auto& [m, n] : study.pairs)
    if (m < 1 || n < 1)
      throw ConfigError("study.pairs entries must be >= 1");
  for (const auto& c : study.cases) {
    if (!(c.dt >= 0.0) || !std::isfinite(c.dt))
      throw ConfigError("study.cases dt must be >= 0");
    if (c.events_per_run < 1 || c.runs < 1)
      throw ConfigError("study.cases entries must be >= 1");
  }
}

ExperimentConfig parse_config(std::istream& is, const ExperimentConfig& defaults) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }
  ExperimentConfig config = defaults;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError("config key '" + section + "' is outside any section");
    const bool known = std::any_of(fields().begin(), fields().end(),
                                   [&](const auto& f) { return f.first.rfind(section + ".", 0) == 0; });
    if (!known)
      throw ConfigError("unknown config section '" + section + "'");
    for (const auto& [key, value] : body) {
      const std::string dotted = section + "." + key;
      const auto* field = find_field(dotted);
      if (!field)
        throw ConfigError("unknown config key '" + dotted + "'");
      field->set(config, value.data());
    }
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::string& path, const ExperimentConfig& defaults) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in, defaults);
}

void apply_override(ExperimentConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override '" + assignment + "' is not of the form section.key=value");
  const auto key = trim(assignment.substr(0, eq));
  const auto* field = find_field(key);
  if (!field)
    throw ConfigError("unknown config key '" + key + "'");
  field->set(config, assignment.substr(eq + 1));
}

std::string config_echo(const ExperimentConfig& config, bool provenance_only) {
  std::string out;
  std::string current;
  for (const auto& [name, field] : fields()) {
    if (provenance_only && !field.provenance)
      continue;
    const auto dot = name.find('.');
    const auto section = name.substr(0, dot);
    if (section != current) {
      out += (out.empty() ? "[" : "\n[") + section + "]\n";
      current = section;
    }
    out += name.substr(dot + 1) + " = " + field.get(config) + "\n";
  }
  return out;
}

std::string config_comment(const ExperimentConfig& config) {
  std::string out;
  std::istringstream is(config_echo(config, true));
  std::string line;
  while (std::getline(is, line))
    if (!line.empty())
      out += "# " + line + "\n";
  return out;
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) { return config_echo(a) == config_echo(b); }

} // namespace backaction
