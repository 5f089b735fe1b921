#include "backaction/commands.hpp"

#include "backaction/config.hpp"
#include "backaction/ensemble.hpp"
#include "backaction/errors.hpp"
#include "backaction/svg.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>

namespace backaction {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr double kPi = std::numbers::pi;

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::string> out;
  std::vector<std::string> formats;
  std::vector<std::string> overrides;
};

class Output {
public:
  Output(const ExperimentConfig& config, std::string command)
      : config_(config), command_(std::move(command)), dir_(config.output.directory) {
    fs::create_directories(dir_);
    write("config.ini", config_echo(config_));
  }

  const ExperimentConfig& config() const { return config_; }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
    if (!out)
      throw ConfigError("cannot write '" + (dir_ / name).string() + "'");
    out << text;
  }

  /// CSV with the configuration and master seed as leading comment lines.
  template <class Fn>
  void csv(const std::string& name, Fn&& body) const {
    std::ostringstream os;
    os << "# backaction " << command_ << "\n" << config_comment(config_);
    body(os);
    write(name, os.str());
  }

  void report(const std::string& name, json body) const {
    if (!config_.output.json)
      return;
    json doc;
    doc["command"] = command_;
    doc["master_seed"] = config_.master_seed;
    doc["config"] = config_echo(config_, true);
    for (auto& [k, v] : body.items())
      doc[k] = v;
    write(name, doc.dump(2) + "\n");
  }

  void plot(const std::string& name, std::span<const svg::Panel> panels, int panel_height = 260) const {
    if (config_.output.svg)
      write(name, svg::render(panels, 720, panel_height));
  }

private:
  ExperimentConfig config_;
  std::string command_;
  fs::path dir_;
};

std::size_t env_workers() {
  const char* v = std::getenv("BACKACTION_WORKERS");
  if (!v || !*v)
    return 1;
  try {
    const long n = std::stol(v);
    if (n >= 1)
      return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
  }
  throw ConfigError(std::string("BACKACTION_WORKERS must be a positive integer, got '") + v + "'");
}

ExperimentConfig resolve_config(const Options& opt) {
  ExperimentConfig defaults;
  defaults.workers = env_workers();
  ExperimentConfig config = opt.config_path.empty() ? defaults : load_config(opt.config_path, defaults);
  for (const auto& o : opt.overrides)
    apply_override(config, o);
  if (opt.seed)
    config.master_seed = *opt.seed;
  if (opt.workers)
    config.workers = *opt.workers;
  if (opt.out)
    config.output.directory = *opt.out;
  if (!opt.formats.empty()) {
    std::string joined;
    for (const auto& f : opt.formats)
      joined += f + ",";
    apply_override(config, "output.formats=" + joined);
  }
  config.validate();
  return config;
}

HamiltonianOperator make_hamiltonian(const ExperimentConfig& c, std::shared_ptr<const FockBasis> basis,
                                     double interaction) {
  BoseHubbardParams p = c.physics;
  p.interaction = interaction;
  return build_hamiltonian(p, std::move(basis));
}

ScatteringKernel make_kernel(const ExperimentConfig& c, std::shared_ptr<const FockBasis> basis) {
  return ScatteringKernel::build(std::move(basis), c.scattering);
}

struct Prepared {
  std::shared_ptr<const FockBasis> basis;
  HamiltonianOperator hamiltonian;
  ManyBodyState initial;
  std::optional<GroundState> ground;
};

Prepared prepare(const ExperimentConfig& c) {
  auto basis = enumerate_basis(c.physics.site_count, c.physics.atom_count);
  auto h = make_hamiltonian(c, basis, c.physics.interaction);
  if (c.initial == "ground") {
    auto gs = ground_state(h);
    auto initial = gs.state;
    return {basis, std::move(h), std::move(initial), std::move(gs)};
  }
  std::ifstream in(c.initial);
  if (!in)
    throw ConfigError("cannot open initial amplitude file '" + c.initial + "'");
  auto initial = read_state_csv(in, basis->size());
  return {basis, std::move(h), std::move(initial), std::nullopt};
}

json boundary_metadata(const ExperimentConfig& c) {
  return {{"boundary", c.physics.open_boundary ? "open" : "periodic"},
          {"hopping_range", "nearest neighbour"},
          {"note", "boundary conditions and hopping range are modelling assumptions"}};
}

std::string dominant_state(const FockBasis& basis, const ManyBodyState& s, double* probability) {
  Eigen::Index best = 0;
  s.amplitudes().cwiseAbs2().maxCoeff(&best);
  *probability = std::norm(s[static_cast<std::size_t>(best)]);
  return basis.state(static_cast<std::size_t>(best)).to_string();
}

svg::Panel histogram_panel(const std::string& title, const AngularHistogram& h, std::span<const double> predicted,
                           const std::string& color_points, const std::string& color_line) {
  svg::Panel p;
  p.title = title;
  p.x_label = "theta (rad)";
  p.y_label = "N_d(theta)";
  p.x_range = std::pair{-kPi, kPi};
  const auto centers = h.centers();
  svg::Series points{centers, {}, svg::Mark::points, color_points, "detections"};
  for (auto c : h.counts())
    points.y.push_back(static_cast<double>(c));
  svg::Series line{centers, {}, svg::Mark::line, color_line, "prediction"};
  const double scale = static_cast<double>(h.scatter_count()) * h.bin_width();
  for (double v : predicted)
    line.y.push_back(v * scale);
  p.series.push_back(std::move(points));
  p.series.push_back(std::move(line));
  return p;
}

int cmd_ground_state(const ExperimentConfig& c) {
  Output out(c, "ground-state");
  auto ground_config = c;
  ground_config.initial = "ground";
  const auto prep = prepare(ground_config);
  const auto& gs = *prep.ground;
  const auto kernel = make_kernel(c, prep.basis);
  const AngularHistogram binning(c.bins);
  const auto thetas = binning.centers();
  const auto curve = predicted_initial_distribution(gs.state, kernel, thetas);

  out.csv("ground_state.csv", [&](std::ostream& os) { write_state_csv(os, *prep.basis, gs.state); });
  if (const auto* spectrum = prep.hamiltonian.dense_spectrum())
    out.csv("spectrum.csv", [&](std::ostream& os) { write_spectrum_csv(os, *spectrum); });
  out.csv("prediction.csv", [&](std::ostream& os) { write_curve_csv(os, thetas, curve); });

  double p_dom = 0.0;
  const auto dom = dominant_state(*prep.basis, gs.state, &p_dom);
  const double scatter = total_scatter_probability(gs.state, kernel);
  out.report("ground_state.json", {{"dimension", prep.basis->size()},
                                   {"energy", gs.energy},
                                   {"residual", gs.residual},
                                   {"method", gs.method},
                                   {"degenerate", gs.degenerate},
                                   {"dominant_state", dom},
                                   {"dominant_probability", p_dom},
                                   {"scatter_probability", scatter},
                                   {"nonscatter_probability", 1.0 - scatter},
                                   {"lattice", boundary_metadata(c)}});
  svg::Panel panel;
  panel.title = "Predicted scattering distribution";
  panel.x_label = "theta (rad)";
  panel.y_label = "P(theta)";
  panel.x_range = std::pair{-kPi, kPi};
  panel.series.push_back({thetas, curve, svg::Mark::line, "#b03030", ""});
  out.plot("prediction.svg", std::span(&panel, 1));

  std::cout << "ground state: dimension " << prep.basis->size() << ", E = " << std::setprecision(12) << gs.energy
            << " (" << gs.method << ", residual " << gs.residual << "), dominant |" << dom << "> p = " << p_dom
            << "\n";
  return kExitOk;
}

int cmd_trajectory(const ExperimentConfig& c) {
  Output out(c, "trajectory");
  const auto prep = prepare(c);
  const auto kernel = make_kernel(c, prep.basis);
  const auto t = run_trajectory(prep.initial, prep.hamiltonian, kernel, c.trajectory_config());

  out.csv("events.csv", [&](std::ostream& os) { write_events_csv(os, t); });
  out.csv("overlaps.csv", [&](std::ostream& os) { write_overlaps_csv(os, t); });
  if (c.snapshot_stride > 0)
    out.csv("snapshots.csv", [&](std::ostream& os) { write_snapshots_csv(os, t); });

  const auto weights = t.class_weights_final;
  const auto top = static_cast<std::size_t>(std::max_element(weights.begin(), weights.end()) - weights.begin());
  json classes = json::array();
  for (auto u : kernel.classes().members[top])
    classes.push_back(prep.basis->state(u).to_string());
  out.report("trajectory.json", {{"seed", t.seed},
                                 {"events", t.events.size()},
                                 {"scatter_events", t.scatter_count()},
                                 {"final_overlap", t.overlaps.empty() ? 0.0 : t.overlaps.back()},
                                 {"dominant_class", top},
                                 {"dominant_class_weight", weights[top]},
                                 {"dominant_class_members", classes}});

  std::vector<svg::Panel> panels(2);
  panels[0].title = "Detected events";
  panels[0].x_label = "event m";
  panels[0].y_label = "theta (rad)";
  panels[0].y_range = std::pair{-kPi, kPi};
  svg::Series ev{{}, {}, svg::Mark::points, "#1f4e9c", ""};
  for (const auto& e : t.events) {
    ev.x.push_back(static_cast<double>(e.index));
    ev.y.push_back(e.theta);
  }
  panels[0].series.push_back(std::move(ev));
  panels[1].title = "Overlap with the initial state";
  panels[1].x_label = "event m";
  panels[1].y_label = "|<Psi_0|Psi_m>|^2";
  panels[1].y_range = std::pair{0.0, 1.0};
  svg::Series ov{{}, t.overlaps, svg::Mark::line, "#1f4e9c", ""};
  for (std::size_t i = 0; i < t.overlaps.size(); ++i)
    ov.x.push_back(static_cast<double>(i + 1));
  panels[1].series.push_back(std::move(ov));
  if (!t.snapshots.empty()) {
    // Rows for basis states that ever reach 1% probability, at most 48 of them.
    std::vector<std::pair<double, std::size_t>> peak;
    for (std::size_t u = 0; u < prep.basis->size(); ++u) {
      double m = 0.0;
      for (const auto& s : t.snapshots)
        m = std::max(m, s.probabilities[u]);
      if (m >= 0.01)
        peak.emplace_back(m, u);
    }
    std::stable_sort(peak.begin(), peak.end(), [](auto& a, auto& b) { return a.first > b.first; });
    if (peak.size() > 48)
      peak.resize(48);
    std::sort(peak.begin(), peak.end(), [](auto& a, auto& b) { return a.second < b.second; });
    svg::Heatmap hm;
    hm.rows = peak.size();
    hm.cols = t.snapshots.size();
    hm.x_min = 0.0;
    hm.x_max = static_cast<double>(t.snapshots.back().event_index);
    for (const auto& [m, u] : peak) {
      hm.row_labels.push_back("|" + prep.basis->state(u).to_string() + ">");
      for (const auto& s : t.snapshots)
        hm.values.push_back(s.probabilities[u]);
    }
    svg::Panel p;
    p.title = "Basis-state probabilities |psi_u|^2";
    p.x_label = "event m";
    p.heatmap = std::move(hm);
    panels.push_back(std::move(p));
  }
  out.plot("trajectory.svg", panels);

  std::cout << "trajectory: " << t.events.size() << " events, " << t.scatter_count()
            << " scattered; dominant class " << top << " weight " << std::setprecision(6) << weights[top] << "\n";
  return kExitOk;
}

int ensemble_exit(std::size_t failures, std::size_t completed) {
  if (failures == 0)
    return kExitOk;
  return completed == 0 ? kExitNumerical : kExitPartialFailure;
}

int cmd_ensemble(const ExperimentConfig& c) {
  Output out(c, "ensemble");
  const auto prep = prepare(c);
  const auto kernel = make_kernel(c, prep.basis);
  const auto res = run_ensemble(prep.initial, prep.hamiltonian, kernel, c.ensemble_config());
  const auto cmp = compare_to_prediction(res.histogram, prep.initial, kernel);
  const auto ends = end_state_statistics(res.final_class_weights, prep.initial, kernel);

  out.csv("histogram.csv", [&](std::ostream& os) { write_histogram_csv(os, res.histogram, cmp); });
  out.csv("prediction.csv", [&](std::ostream& os) { write_curve_csv(os, cmp.centers, cmp.predicted); });
  out.csv("end_states.csv", [&](std::ostream& os) { write_end_states_csv(os, ends); });
  out.csv("runs.csv", [&](std::ostream& os) {
    os << "run,seed,status,dominant_class,dominant_weight\n" << std::setprecision(17);
    for (std::size_t r = 0; r < res.seeds.size(); ++r) {
      const auto& w = res.final_class_weights[r];
      if (w.empty()) {
        os << r << "," << res.seeds[r] << ",failed,,\n";
        continue;
      }
      const auto top = std::max_element(w.begin(), w.end());
      os << r << "," << res.seeds[r] << ",ok," << (top - w.begin()) << "," << *top << "\n";
    }
  });

  json failures = json::array();
  for (const auto& f : res.failures)
    failures.push_back({{"run", f.run_index}, {"message", f.message}});
  const double fraction = res.histogram.total_events()
                              ? static_cast<double>(res.histogram.scatter_count()) /
                                    static_cast<double>(res.histogram.total_events())
                              : 0.0;
  out.report("ensemble.json", {{"runs", res.seeds.size()},
                               {"completed_runs", res.completed_runs()},
                               {"events", res.histogram.total_events()},
                               {"scatter_events", res.histogram.scatter_count()},
                               {"scatter_fraction", fraction},
                               {"predicted_scatter_probability", total_scatter_probability(prep.initial, kernel)},
                               {"l1", cmp.l1},
                               {"l2", cmp.l2},
                               {"end_state_unconverged", ends.unconverged},
                               {"seeds", res.seeds},
                               {"failures", failures}});
  const auto panel = histogram_panel("Summed detections (points) and initial-state prediction (line)",
                                     res.histogram, cmp.predicted, "#1f4e9c", "#b03030");
  out.plot("ensemble.svg", std::span(&panel, 1));

  std::cout << "ensemble: " << res.completed_runs() << "/" << res.seeds.size() << " runs, "
            << res.histogram.scatter_count() << " scattered of " << res.histogram.total_events() << "; L1 "
            << std::setprecision(6) << cmp.l1 << ", L2 " << cmp.l2 << "\n";
  for (const auto& f : res.failures)
    std::cerr << "run " << f.run_index << " failed: " << f.message << "\n";
  return ensemble_exit(res.failures.size(), res.completed_runs());
}

int cmd_classes(const ExperimentConfig& c) {
  Output out(c, "classes");
  const auto basis = enumerate_basis(c.physics.site_count, c.physics.atom_count);
  const auto kernel = make_kernel(c, basis);
  out.csv("classes.csv", [&](std::ostream& os) { write_classes_csv(os, *basis, kernel.classes()); });
  out.csv("kernel.csv", [&](std::ostream& os) { write_kernel_csv(os, kernel); });
  out.report("classes.json", {{"dimension", basis->size()}, {"class_count", kernel.classes().size()}});
  std::cout << "classes: " << kernel.classes().size() << " (basis dimension " << basis->size() << ")\n";
  return kExitOk;
}

int cmd_scaling_study(const ExperimentConfig& c) {
  Output out(c, "scaling-study");
  const auto prep = prepare(c);
  const auto kernel = make_kernel(c, prep.basis);
  const auto study = error_scaling_study(c.study.pairs, prep.initial, prep.hamiltonian, kernel, c.ensemble_config());

  out.csv("scaling.csv", [&](std::ostream& os) {
    os << "m,n,mn,l1,l2\n" << std::setprecision(17);
    for (const auto& p : study.points)
      os << p.events_per_run << "," << p.runs << "," << p.events_per_run * p.runs << "," << p.l1 << "," << p.l2
         << "\n";
  });
  json points = json::array();
  for (const auto& p : study.points)
    points.push_back({{"m", p.events_per_run}, {"n", p.runs}, {"l1", p.l1}, {"l2", p.l2}});
  out.report("scaling.json", {{"slope", study.slope}, {"intercept", study.intercept}, {"points", points}});

  svg::Panel panel;
  panel.title = "L2 error against total events mn";
  panel.x_label = "mn";
  panel.y_label = "L2 error";
  panel.log_x = true;
  panel.log_y = true;
  svg::Series pts{{}, {}, svg::Mark::points, "#1f4e9c", "measured"};
  svg::Series fit{{}, {}, svg::Mark::line, "#b03030", "fit"};
  for (const auto& p : study.points) {
    const double mn = static_cast<double>(p.events_per_run) * static_cast<double>(p.runs);
    pts.x.push_back(mn);
    pts.y.push_back(p.l2);
    fit.x.push_back(mn);
    fit.y.push_back(std::exp(study.intercept + study.slope * std::log(mn)));
  }
  panel.series = {pts, fit};
  out.plot("scaling.svg", std::span(&panel, 1));

  std::cout << "scaling: slope " << std::setprecision(6) << study.slope << " over " << study.points.size()
            << " points\n";
  return kExitOk;
}

int cmd_evolution_study(const ExperimentConfig& c) {
  Output out(c, "evolution-study");
  const auto prep = prepare(c);
  const auto kernel = make_kernel(c, prep.basis);
  const auto hb = make_hamiltonian(c, prep.basis, c.study.interaction_b);
  const auto gb = ground_state(hb);
  const EvolutionSetup a{"U/J=" + std::to_string(c.physics.interaction), &prep.initial, &prep.hamiltonian};
  const EvolutionSetup b{"U/J=" + std::to_string(c.study.interaction_b), &gb.state, &hb};
  const auto study = evolution_degradation_study(c.study.cases, a, b, kernel, c.ensemble_config());

  out.csv("evolution.csv", [&](std::ostream& os) {
    os << "dt,events,runs,d_between,d_fidelity_a,d_fidelity_b,failures\n" << std::setprecision(17);
    for (const auto& r : study.rows)
      os << r.setting.dt << "," << r.setting.events_per_run << "," << r.setting.runs << "," << r.d_between << ","
         << r.d_fidelity_a << "," << r.d_fidelity_b << "," << r.failures << "\n";
  });
  out.csv("evolution_histograms.csv", [&](std::ostream& os) {
    os << "case,center,count_a,count_b,predicted_a,predicted_b\n" << std::setprecision(17);
    for (std::size_t i = 0; i < study.rows.size(); ++i)
      for (std::size_t k = 0; k < study.centers.size(); ++k)
        os << i << "," << study.centers[k] << "," << study.rows[i].histogram_a.counts()[k] << ","
           << study.rows[i].histogram_b.counts()[k] << "," << study.predicted_a[k] << "," << study.predicted_b[k]
           << "\n";
  });
  json rows = json::array();
  std::size_t failures = 0;
  for (const auto& r : study.rows) {
    rows.push_back({{"dt", r.setting.dt},
                    {"events_per_run", r.setting.events_per_run},
                    {"runs", r.setting.runs},
                    {"d_between", r.d_between},
                    {"d_fidelity_a", r.d_fidelity_a},
                    {"d_fidelity_b", r.d_fidelity_b},
                    {"failures", r.failures}});
    failures += r.failures;
  }
  out.report("evolution.json", {{"state_a", a.label}, {"state_b", b.label}, {"cases", rows}});

  std::vector<svg::Panel> panels;
  for (const auto& r : study.rows) {
    std::ostringstream title;
    title << "dt = " << r.setting.dt << ", " << r.setting.runs << " x " << r.setting.events_per_run << " events";
    auto p = histogram_panel(title.str(), r.histogram_a, study.predicted_a, "#1f4e9c", "#1f4e9c");
    auto q = histogram_panel("", r.histogram_b, study.predicted_b, "#b03030", "#b03030");
    p.series[0].label = a.label;
    p.series[1].label = "";
    q.series[0].label = b.label;
    q.series[1].label = "";
    p.series.push_back(std::move(q.series[0]));
    p.series.push_back(std::move(q.series[1]));
    panels.push_back(std::move(p));
  }
  out.plot("evolution.svg", panels);

  for (const auto& r : study.rows)
    std::cout << "dt " << r.setting.dt << ": D_between " << std::setprecision(6) << r.d_between
              << ", D_fidelity " << r.d_fidelity_a << " / " << r.d_fidelity_b << "\n";
  return failures ? kExitPartialFailure : kExitOk;
}

} // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Probe scattering with measurement back-action on a 1D Bose-Hubbard lattice"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "INI configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "master seed (overrides ensemble.master_seed)");
    sub->add_option("--workers", opt.workers, "worker threads (default: BACKACTION_WORKERS or 1)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--format", opt.formats, "output formats among csv, json, svg; CSV is always written")
        ->check(CLI::IsMember({"csv", "json", "svg"}))
        ->delimiter(',');
    sub->add_option("--set", opt.overrides, "override a config key, e.g. --set physics.sites=9");
  };

  using Command = int (*)(const ExperimentConfig&);
  const std::vector<std::tuple<std::string, std::string, Command>> commands{
      {"ground-state", "ground state, its amplitudes and predicted scattering curve", cmd_ground_state},
      {"trajectory", "one quantum-jump trajectory: events, overlaps, snapshots", cmd_trajectory},
      {"ensemble", "summed angular histogram over many runs against the prediction", cmd_ensemble},
      {"classes", "pair-correlation equivalence classes of the basis", cmd_classes},
      {"scaling-study", "reconstruction error against total event count at dt = 0", cmd_scaling_study},
      {"evolution-study", "pattern degradation with evolution time between events", cmd_evolution_study},
  };
  Command selected = nullptr;
  for (const auto& [name, help, fn] : commands) {
    auto* sub = app.add_subcommand(name, help);
    add_common(sub);
    sub->callback([&selected, f = fn] { selected = f; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const auto config = resolve_config(opt);
    return selected(config);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "output error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

} // namespace backaction
