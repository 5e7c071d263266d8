#include "mnca/abc.hpp"
#include "mnca/analysis.hpp"
#include "mnca/io/checkpoint.hpp"
#include "mnca/io/config.hpp"
#include "mnca/io/csv.hpp"
#include "mnca/io/image.hpp"
#include "mnca/metrics.hpp"
#include "mnca/parallel.hpp"
#include "mnca/perturb.hpp"
#include "mnca/tissue.hpp"
#include "mnca/tissue_model.hpp"
#include "mnca/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

namespace fs = std::filesystem;
using namespace mnca;

namespace {

constexpr const char* kVersion = "0.1.0";

// Top-level stream tags; each subcommand derives its streams from these.
enum Stream : std::uint64_t {
  kCohort = 1,
  kInit = 2,
  kTrain = 3,
  kGenerate = 4,
  kGrow = 5,
  kPerturb = 6,
  kAbc = 7,
  kAbcObserved = 8,
  kAbcPosterior = 9,
  kNoise = 10,
  kSteer = 11,
  kSweep = 12,
  kReference = 13,
};

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  int threads = 1;
  int log_every = 50;
};

struct Run {
  std::string command;
  ExperimentConfig cfg;
  std::uint64_t seed = 0;
  bool seed_generated = false;
  fs::path out;
  std::vector<std::string> outputs;
  nlohmann::json extra = nlohmann::json::object();

  RngStream root() const { return RngStream(seed); }
  std::string path(const std::string& name) {
    outputs.push_back(name);
    return (out / name).string();
  }
};

Run start(const std::string& command, const Globals& g) {
  Run run;
  run.command = command;
  if (!g.config.empty()) {
    run.cfg = parse_config(g.config);
  } else {
    run.cfg.validate();
  }
  if (g.seed) {
    run.seed = *g.seed;
  } else if (run.cfg.seed_given) {
    run.seed = run.cfg.seed;
  } else {
    std::random_device rd;
    run.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    run.seed_generated = true;
    std::cerr << "no seed given, using " << run.seed << "\n";
  }
  run.cfg.seed = run.seed;
  run.out = g.out_dir;
  fs::create_directories(run.out);
  set_thread_count(g.threads);
  return run;
}

void finish(Run& run) {
  nlohmann::json m;
  m["command"] = run.command;
  m["seed"] = run.seed;
  m["seed_generated"] = run.seed_generated;
  m["config_hash"] = config_hash(run.cfg);
  m["config"] = config_to_json(run.cfg);
  m["versions"] = {{"mnca", kVersion}, {"checkpoint_format", kCheckpointVersion}, {"cohort_format", 1}};
  m["outputs"] = run.outputs;
  m["details"] = run.extra;
  std::ofstream f(run.out / ("manifest_" + run.command + ".json"));
  f << m.dump(2) << '\n';
}

EpochCallback progress(int every) {
  return [every](const LossRow& r) {
    if (every > 0 && r.epoch % every == 0) {
      std::cerr << "epoch " << r.epoch << " loss " << r.loss << " lr " << r.lr << "\n";
    }
  };
}

TissueCohort obtain_cohort(Run& run, const std::string& flag_path) {
  const std::string path = !flag_path.empty() ? flag_path : run.cfg.tissue.cohort;
  if (!path.empty()) return load_cohort(path);
  return run_cohort(run.cfg.tissue.sim_params(), run.cfg.tissue.realizations, run.root().fork(kCohort));
}

Grid<float> pad_grid(const Grid<float>& g, int pad, float value) {
  if (pad == 0) return g;
  Grid<float> out(g.channels(), g.height + 2 * pad, g.width + 2 * pad);
  out.data.setConstant(value);
  for (int c = 0; c < g.channels(); ++c) {
    for (int y = 0; y < g.height; ++y) {
      for (int x = 0; x < g.width; ++x) out.at(c, y + pad, x + pad) = g.at(c, y, x);
    }
  }
  return out;
}

Grid<float> image_target(const ExperimentConfig& cfg) {
  const auto& im = cfg.image;
  if (im.target == "procedural") {
    return pad_grid(procedural_target(im.target_size), im.pad, static_cast<float>(im.pad_value));
  }
  return ingest_image(im.target, im.target_size, im.pad, static_cast<float>(im.pad_value));
}

std::pair<int, int> seed_pixel(const ExperimentConfig& cfg, const Grid<float>& target) {
  const int sy = cfg.image.seed_y >= 0 ? cfg.image.seed_y : target.height / 2;
  const int sx = cfg.image.seed_x >= 0 ? cfg.image.seed_x : target.width / 2;
  return {sy, sx};
}

Grid<float> grow(const Model<float>& model, const ExperimentConfig& cfg, const Grid<float>& target,
                 const RngStream& rng) {
  const auto [sy, sx] = seed_pixel(cfg, target);
  Grid<float> x = seed_state<float>(model.channels(), target.height, target.width, sy, sx);
  StepOptions opts;
  for (int t = 0; t < cfg.image.grow_steps; ++t) x = step(model, x, opts, rng, static_cast<std::uint64_t>(t)).grid;
  return x;
}

Model<float> load_model(const std::string& path) {
  if (path.empty()) throw UsageError("--checkpoint is required");
  return load_checkpoint(path).model;
}

std::string model_label(const std::string& path) { return fs::path(path).stem().string(); }

// ---------------------------------------------------------------------------

struct SimulateArgs {
  int frames = 0;
};

void cmd_simulate(const Globals& g, const SimulateArgs& a) {
  Run run = start("simulate-tissue", g);
  const SimParams params = run.cfg.tissue.sim_params();
  const TissueCohort cohort = run_cohort(params, run.cfg.tissue.realizations, run.root().fork(kCohort));
  save_cohort(run.path("cohort.bin"), cohort);

  CsvWriter props(run.path("proportions.csv"), {"type", "proportion"});
  const auto p = type_proportions(cohort);
  for (int k = 0; k < kCellTypes; ++k) props.row({std::string(cell_type_name(k + 1)), p[static_cast<std::size_t>(k)]});
  props.close();

  CsvWriter sizes(run.path("sizes.csv"), {"realization", "final_size", "border_complexity"});
  for (std::size_t r = 0; r < cohort.realizations.size(); ++r) {
    const CellGrid& last = cohort.realizations[r].back();
    sizes.row({static_cast<long long>(r), static_cast<long long>(tissue_size(last)),
               static_cast<long long>(border_complexity(last))});
  }
  sizes.close();

  for (int r = 0; r < std::min<int>(a.frames, static_cast<int>(cohort.realizations.size())); ++r) {
    const auto& traj = cohort.realizations[static_cast<std::size_t>(r)];
    for (int t : {0, static_cast<int>(traj.size()) / 2, static_cast<int>(traj.size()) - 1}) {
      write_png(run.path("tissue_r" + std::to_string(r) + "_t" + std::to_string(t) + ".png"),
                render_tissue(traj[static_cast<std::size_t>(t)], 8));
    }
  }
  run.extra["realizations"] = cohort.size();
  finish(run);
}

struct TrainArgs {
  std::string cohort;
};

void cmd_train(const Globals& g, const TrainArgs& a) {
  Run run = start("train", g);
  const ExperimentConfig& cfg = run.cfg;
  const RngStream root = run.root();
  Model<float> model = Model<float>::initialize(cfg.model, root.fork(kInit));
  TrainConfig tc = cfg.train_config();
  tc.seed = root.fork(kTrain).bits(0, 0, 0);

  TrainResult<float> result;
  if (cfg.task == Task::Tissue) {
    const TissueCohort cohort = obtain_cohort(run, a.cohort);
    result = train_timeseries(std::move(model), encode_cohort<float>(cohort), tc, progress(g.log_every));
  } else {
    const Grid<float> target = image_target(cfg);
    result = train_pool<float>(std::move(model), target, tc, nullptr, progress(g.log_every));
    const Grid<float> grown = grow(result.model, cfg, target, root.fork(kGrow));
    write_png(run.path("grown.png"), render_rgba(grown));
    write_png(run.path("target.png"), render_rgba(target));
    run.extra["grown_mse"] = rgba_mse(grown, target);
  }

  CsvWriter loss(run.path("loss.csv"), {"epoch", "loss", "lr"});
  for (const auto& r : result.log) loss.row({static_cast<long long>(r.epoch), r.loss, r.lr});
  loss.close();

  Checkpoint ck;
  ck.model = result.model;
  ck.config = config_to_json(cfg);
  ck.training_steps = result.optimizer.step;
  ck.seed = run.seed;
  save_checkpoint(run.path("model.json"), ck);
  run.outputs.push_back("model.json.bin");
  if (!result.log.empty()) run.extra["final_loss"] = result.log.back().loss;
  finish(run);
}

struct EvalArgs {
  std::vector<std::string> checkpoints;
  std::string cohort;
};

StepOptions inference_options() { return StepOptions{}; }

void cmd_evaluate(const Globals& g, const EvalArgs& a) {
  Run run = start("evaluate", g);
  if (a.checkpoints.empty()) throw UsageError("evaluate needs at least one --checkpoint");
  const ExperimentConfig& cfg = run.cfg;
  const int repeats = cfg.tissue.eval_repeats;

  if (cfg.task == Task::Tissue) {
    const TissueCohort real = obtain_cohort(run, a.cohort);
    CsvWriter runs(run.path("metrics_runs.csv"), {"model", "variant", "run", "kl_div", "size_w", "border_w"});
    CsvWriter table(run.path("metrics.csv"), {"model", "variant", "kl_div_mean", "kl_div_sd", "size_w_mean",
                                              "size_w_sd", "border_w_mean", "border_w_sd"});
    for (const auto& path : a.checkpoints) {
      const Model<float> model = load_model(path);
      std::vector<double> kl, sw, bw;
      for (int r = 0; r < repeats; ++r) {
        const RngStream rng = run.root().fork(kGenerate).fork(static_cast<std::uint64_t>(r));
        const TissueCohort gen = generate_cohort(model, real, inference_options(), rng, cfg.tissue.discretize);
        const MetricReport m = evaluate_cohorts(real, gen);
        runs.row({model_label(path), std::string(to_string(model.variant())), static_cast<long long>(r), m.kl_div,
                  m.size_w, m.border_w});
        kl.push_back(m.kl_div);
        sw.push_back(m.size_w);
        bw.push_back(m.border_w);
      }
      const MeanSd k = mean_sd(kl), s = mean_sd(sw), b = mean_sd(bw);
      table.row({model_label(path), std::string(to_string(model.variant())), k.mean, k.sd, s.mean, s.sd, b.mean, b.sd});
    }
    runs.close();
    table.close();
  } else {
    const Grid<float> target = image_target(cfg);
    CsvWriter table(run.path("metrics.csv"), {"model", "variant", "mse_mean", "mse_sd"});
    for (const auto& path : a.checkpoints) {
      const Model<float> model = load_model(path);
      std::vector<double> mse(static_cast<std::size_t>(repeats));
      parallel_for(mse.size(), [&](std::size_t r) {
        mse[r] = rgba_mse(grow(model, cfg, target, run.root().fork(kGrow).fork(r)), target);
      });
      const MeanSd m = mean_sd(mse);
      table.row({model_label(path), std::string(to_string(model.variant())), m.mean, m.sd});
    }
    table.close();
  }
  finish(run);
}

struct PerturbArgs {
  std::vector<std::string> checkpoints;
  bool frames = false;
};

void cmd_perturb(const Globals& g, const PerturbArgs& a) {
  Run run = start("perturb", g);
  if (a.checkpoints.empty()) throw UsageError("perturb needs at least one --checkpoint");
  const ExperimentConfig& cfg = run.cfg;
  if (cfg.task != Task::Image) throw ConfigError("perturb runs on image tasks (task: image)");
  const Grid<float> target = image_target(cfg);
  const auto& pc = cfg.perturb;

  CsvWriter table(run.path("recovery.csv"),
                  {"model", "variant", "perturbation", "final_mse_mean", "final_mse_sd", "ci95", "completed", "failed"});
  CsvWriter curves(run.path("recovery_curves.csv"), {"model", "perturbation", "step", "mse_mean"});
  for (const auto& path : a.checkpoints) {
    const Model<float> model = load_model(path);
    const std::string label = model_label(path);
    const Grid<float> state = grow(model, cfg, target, run.root().fork(kGrow));
    for (std::size_t pi = 0; pi < pc.perturbations.size(); ++pi) {
      const Perturbation& p = pc.perturbations[pi];
      p.validate(target.height, target.width);
      const std::string name = std::string(to_string(p.kind)) + "_" + std::to_string(pi);
      const RngStream rng = run.root().fork(kPerturb).fork(pi);
      const RecoveryResult res = recovery_experiment(model, state, target, p, pc.repeats, pc.steps,
                                                     inference_options(), rng);
      table.row({label, std::string(to_string(model.variant())), name, res.final_mean, res.final_sd, res.ci95,
                 static_cast<long long>(res.completed), static_cast<long long>(pc.repeats - res.completed)});
      const auto mean = res.mean_curve();
      for (std::size_t s = 0; s < mean.size(); ++s) curves.row({label, name, static_cast<long long>(s), mean[s]});

      if (a.frames) {
        // Repeat 0 replayed with the same streams as recovery_experiment.
        const RngStream rep = rng.fork(0);
        Grid<float> x = apply_perturbation(state, p, rep.fork(0));
        for (int s = 0; s <= pc.steps; ++s) {
          if (s == 0 || s == 50 || s == 100 || s == pc.steps) {
            write_png(run.path(label + "_" + name + "_step" + std::to_string(s) + ".png"), render_rgba(x));
          }
          if (s < pc.steps) x = step(model, x, inference_options(), rep.fork(1), static_cast<std::uint64_t>(s)).grid;
        }
      }
    }
  }
  table.close();
  curves.close();
  finish(run);
}

struct AbcArgs {
  std::string observed;
};

void cmd_abc(const Globals& g, const AbcArgs& a) {
  Run run = start("abc", g);
  const ExperimentConfig& cfg = run.cfg;
  const SimParams base = cfg.tissue.sim_params();
  const RngStream root = run.root();
  const TissueCohort observed = !a.observed.empty() ? load_cohort(a.observed)
                                                    : run_cohort(base, cfg.abc.observed_realizations,
                                                                 root.fork(kAbcObserved));
  AbcOptions opts;
  opts.particles = cfg.abc.particles;
  opts.kind = cfg.abc.statistic;
  opts.quantile = cfg.abc.quantile;
  if (cfg.abc.quantile == 0.0) opts.epsilon = cfg.abc.epsilon;
  opts.realizations_per_particle = cfg.abc.realizations_per_particle;

  const AbcResult res = abc_run(observed, cfg.abc.prior, base, opts, root.fork(kAbc));

  std::vector<std::string> header{"particle"};
  for (const auto& n : flat_names()) header.push_back(n);
  header.insert(header.end(), {"distance", "accepted", "weight"});
  CsvWriter particles(run.path("particles.csv"), header);
  for (std::size_t i = 0; i < res.particles.size(); ++i) {
    const Particle& p = res.particles[i];
    std::vector<CsvWriter::Cell> row{static_cast<long long>(i)};
    for (double v : flatten(p.params)) row.emplace_back(v);
    row.emplace_back(p.distance);
    row.emplace_back(static_cast<long long>(p.accepted));
    row.emplace_back(p.weight);
    particles.row(row);
  }
  particles.close();

  CsvWriter posterior(run.path("posterior.csv"), {"parameter", "value"});
  const auto names = flat_names();
  const auto values = flatten(res.posterior);
  for (std::size_t i = 0; i < names.size(); ++i) posterior.row({names[i], values[i]});
  posterior.close();

  const TissueCohort generated = run_cohort(res.posterior, cfg.abc.posterior_realizations, root.fork(kAbcPosterior));
  const MetricReport m = evaluate_cohorts(observed, generated);
  CsvWriter summary(run.path("abc_summary.csv"), {"statistic", "epsilon", "acceptance_rate", "min_distance",
                                                 "kl_div", "size_w", "border_w"});
  summary.row({std::string(to_string(cfg.abc.statistic)), res.epsilon, res.acceptance_rate, res.min_distance,
               m.kl_div, m.size_w, m.border_w});
  summary.close();
  finish(run);
}

struct AnalyzeArgs {
  std::string checkpoint;
  std::string cohort;
};

Grid<float> reference_state(Run& run, const Model<float>& model, const std::string& cohort_path, int steps) {
  const ExperimentConfig& cfg = run.cfg;
  if (cfg.task == Task::Image) {
    const Grid<float> target = image_target(cfg);
    return grow(model, cfg, target, run.root().fork(kGrow));
  }
  TissueCohort cohort = obtain_cohort(run, cohort_path);
  TissueCohort first;
  first.realizations.push_back({cohort.realizations.front().front()});
  first.realizations.front().resize(static_cast<std::size_t>(steps) + 1, first.realizations.front().front());
  const TissueCohort gen =
      generate_cohort(model, first, inference_options(), run.root().fork(kReference), cfg.tissue.discretize);
  Grid<float> state(model.channels(), gen.realizations[0].back().size, gen.realizations[0].back().size);
  state.data.topRows(kCellLabels) = one_hot<float>(gen.realizations[0].back()).data;
  return state;
}

void cmd_analyze(const Globals& g, const AnalyzeArgs& a) {
  Run run = start("analyze", g);
  const ExperimentConfig& cfg = run.cfg;
  const Model<float> model = load_model(a.checkpoint);
  const Grid<float> state = reference_state(run, model, a.cohort, cfg.analyze.state_steps);

  if (cfg.task == Task::Tissue) {
    write_png(run.path("reference.png"), render_tissue(decode(state), 8));
  } else {
    write_png(run.path("reference.png"), render_rgba(state));
  }

  const LipschitzReport lip = lipschitz_report(model, &state);
  CsvWriter lcsv(run.path("lipschitz.csv"), {"rule", "bound", "weight"});
  for (std::size_t k = 0; k < lip.rule_bounds.size(); ++k) {
    lcsv.row({std::to_string(k), lip.rule_bounds[k], lip.weights[k]});
  }
  lcsv.row({std::string("mixture"), lip.mixture_bound, 1.0});
  lcsv.row({std::string("sobel"), lip.sobel_factor, 0.0});
  lcsv.close();
  run.extra["lipschitz_converged"] = lip.converged;

  if (is_mixture(model.variant())) {
    const RuleMap rm = rule_map(model, state);
    std::vector<std::string> header{"y", "x", "argmax"};
    for (int k = 0; k < model.rule_count(); ++k) header.push_back("p" + std::to_string(k));
    CsvWriter mcsv(run.path("rule_map.csv"), header);
    for (Index p = 0; p < rm.probs.cols(); ++p) {
      std::vector<CsvWriter::Cell> row{static_cast<long long>(p / rm.width), static_cast<long long>(p % rm.width),
                                       static_cast<long long>(rm.argmax[static_cast<std::size_t>(p)])};
      for (Index k = 0; k < rm.probs.rows(); ++k) row.emplace_back(static_cast<double>(rm.probs(k, p)));
      mcsv.row(row);
    }
    mcsv.close();
    for (Index k = 0; k < rm.probs.rows(); ++k) {
      std::vector<double> vals(static_cast<std::size_t>(rm.probs.cols()));
      for (Index p = 0; p < rm.probs.cols(); ++p) vals[static_cast<std::size_t>(p)] = rm.probs(k, p);
      write_png(run.path("rule_" + std::to_string(k) + ".png"), render_heatmap(vals, rm.height, rm.width));
    }
  }

  if (model.variant() == Variant::MncaNoise) {
    std::vector<Index> pixels(cfg.analyze.pixels.begin(), cfg.analyze.pixels.end());
    if (pixels.empty() && cfg.task == Task::Tissue) {
      const CellGrid labels = decode(state);
      for (Index p = 0; p < static_cast<Index>(labels.cells.size()); ++p) {
        if (labels.cells[static_cast<std::size_t>(p)] == STEM) pixels.push_back(p);
      }
    }
    if (!pixels.empty()) {
      const int classes = cfg.task == Task::Tissue ? kCellLabels : 4;
      const NoisePartition np = noise_partition(model, state, pixels, cfg.analyze.noise_draws, classes,
                                                run.root().fork(kNoise), cfg.analyze.permutations);
      CsvWriter samples(run.path("noise_samples.csv"), {"pixel", "draw", "noise", "outcome"});
      for (std::size_t i = 0; i < np.pixels.size(); ++i) {
        for (std::size_t d = 0; d < np.samples[i].size(); ++d) {
          samples.row({static_cast<long long>(np.pixels[i]), static_cast<long long>(d), np.samples[i][d].noise,
                        static_cast<long long>(np.samples[i][d].outcome)});
        }
      }
      samples.close();
      CsvWriter summary(run.path("noise_partition.csv"), {"class", "frequency", "noise_mean"});
      for (int c = 0; c < np.classes; ++c) {
        summary.row({static_cast<long long>(c), np.class_frequency[static_cast<std::size_t>(c)],
                     np.class_noise_mean[static_cast<std::size_t>(c)]});
      }
      summary.close();
      run.extra["noise_statistic"] = np.statistic;
      run.extra["noise_p_value"] = np.p_value;
    }
  }
  finish(run);
}

struct SweepArgs {
  std::string cohort;
};

void cmd_sweep(const Globals& g, const SweepArgs& a) {
  Run run = start("sweep-rules", g);
  const ExperimentConfig& cfg = run.cfg;
  if (cfg.task != Task::Tissue) throw ConfigError("sweep-rules runs on the tissue task");
  const TissueCohort cohort = obtain_cohort(run, a.cohort);
  const auto rows = rules_sweep(cfg.model, cfg.train_config(), cohort, cfg.sweep.rule_counts, cfg.sweep.repeats,
                                run.root().fork(kSweep).bits(0, 0, 0));
  CsvWriter detail(run.path("sweep_runs.csv"), {"rules", "repeat", "kl_div", "error"});
  for (const auto& r : rows) {
    detail.row({static_cast<long long>(r.rules), static_cast<long long>(r.repeat), r.kl, r.error});
  }
  detail.close();
  CsvWriter table(run.path("sweep.csv"), {"rules", "kl_div_mean", "kl_div_sd", "completed"});
  for (int k : cfg.sweep.rule_counts) {
    std::vector<double> kl;
    for (const auto& r : rows) {
      if (r.rules == k && r.error.empty()) kl.push_back(r.kl);
    }
    const MeanSd m = mean_sd(kl);
    table.row({static_cast<long long>(k), m.mean, m.sd, static_cast<long long>(kl.size())});
  }
  table.close();
  finish(run);
}

struct SteerArgs {
  std::string checkpoint;
  std::string multipliers;
  std::string cohort;
  bool frames = false;
};

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("--multipliers: cannot parse '" + item + "'");
    }
  }
  return out;
}

void cmd_steer(const Globals& g, const SteerArgs& a) {
  Run run = start("steer", g);
  const ExperimentConfig& cfg = run.cfg;
  const Model<float> model = load_model(a.checkpoint);
  StepOptions opts = inference_options();
  opts.steering = a.multipliers.empty() ? cfg.steer.multipliers : parse_list(a.multipliers);
  check_steering(opts.steering, model.rule_count());
  run.extra["multipliers"] = opts.steering;

  const RngStream rng = run.root().fork(kSteer);
  const int steps = cfg.steer.steps;
  Grid<float> x;
  if (cfg.task == Task::Tissue) {
    const TissueCohort cohort = obtain_cohort(run, a.cohort);
    x = Grid<float>(model.channels(), cohort.realizations.front().front().size,
                    cohort.realizations.front().front().size);
    x.data.topRows(kCellLabels) = one_hot<float>(cohort.realizations.front().front()).data;
  } else {
    const Grid<float> target = image_target(cfg);
    const auto [sy, sx] = seed_pixel(cfg, target);
    x = seed_state<float>(model.channels(), target.height, target.width, sy, sx);
  }

  std::vector<std::string> header{"step"};
  if (cfg.task == Task::Tissue) {
    for (int k = 1; k <= kCellTypes; ++k) header.push_back(std::string(cell_type_name(k)));
  }
  for (int k = 0; k < model.rule_count(); ++k) header.push_back("rule" + std::to_string(k));
  CsvWriter trace(run.path("steer.csv"), header);

  auto frame = [&](int t) {
    if (!a.frames) return;
    const std::string name = "steer_step" + std::to_string(t) + ".png";
    if (cfg.task == Task::Tissue) {
      write_png(run.path(name), render_tissue(decode(x), 8));
    } else {
      write_png(run.path(name), render_rgba(x));
    }
  };
  frame(0);
  for (int t = 0; t < steps; ++t) {
    StepResult<float> r = step(model, x, opts, rng, static_cast<std::uint64_t>(t));
    x = std::move(r.grid);
    std::vector<CsvWriter::Cell> row{static_cast<long long>(t + 1)};
    if (cfg.task == Task::Tissue) {
      const CellGrid labels = decode(x);
      if (cfg.tissue.discretize == Discretize::Argmax) {
        x.data.setZero();
        x.data.topRows(kCellLabels) = one_hot<float>(labels).data;
      }
      std::array<long long, kCellLabels> counts{};
      for (auto c : labels.cells) ++counts[c];
      for (int k = 1; k <= kCellTypes; ++k) row.emplace_back(counts[static_cast<std::size_t>(k)]);
    }
    std::vector<long long> usage(static_cast<std::size_t>(model.rule_count()), 0);
    for (int c : r.assignment.chosen) {
      if (c >= 0) ++usage[static_cast<std::size_t>(c)];
    }
    if (!is_mixture(model.variant())) usage[0] = x.pixels();
    for (long long u : usage) row.emplace_back(static_cast<double>(u) / static_cast<double>(x.pixels()));
    trace.row(row);
    if (t + 1 == steps || (t + 1) % 10 == 0) frame(t + 1);
  }
  trace.close();
  finish(run);
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Mixtures of neural cellular automata: simulation, training and analysis"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "YAML experiment config");
  app.add_option("--seed", g.seed, "Root seed (overrides the config)");
  app.add_option("--out-dir", g.out_dir, "Output directory")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--log-every", g.log_every, "Training progress interval in epochs (0 = silent)");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate-tissue", "Generate a tissue cohort");
  c_sim->add_option("--frames", sim.frames, "Render PNG frames for the first N realizations");

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train a model (tissue time series or image pool)");
  c_train->add_option("--cohort", train.cohort, "Training cohort (default: simulate)");

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("evaluate", "Score checkpoints (tissue metrics or image MSE)");
  c_eval->add_option("--checkpoint", eval.checkpoints, "Checkpoint manifest(s)")->required();
  c_eval->add_option("--cohort", eval.cohort, "Reference cohort (default: simulate)");

  PerturbArgs pert;
  auto* c_pert = app.add_subcommand("perturb", "Perturbation recovery experiment");
  c_pert->add_option("--checkpoint", pert.checkpoints, "Checkpoint manifest(s)")->required();
  c_pert->add_flag("--frames", pert.frames, "Write PNG frames of the first repeat");

  AbcArgs abc;
  auto* c_abc = app.add_subcommand("abc", "Rejection ABC on the tissue simulator");
  c_abc->add_option("--observed", abc.observed, "Observed cohort (default: simulate)");

  AnalyzeArgs an;
  auto* c_an = app.add_subcommand("analyze", "Rule maps, Lipschitz bounds and noise partitioning");
  c_an->add_option("--checkpoint", an.checkpoint, "Checkpoint manifest")->required();
  c_an->add_option("--cohort", an.cohort, "Cohort for the reference state");

  SweepArgs sw;
  auto* c_sw = app.add_subcommand("sweep-rules", "KL divergence as a function of the rule count");
  c_sw->add_option("--cohort", sw.cohort, "Training cohort (default: simulate)");

  SteerArgs st;
  auto* c_st = app.add_subcommand("steer", "Roll out with per-rule probability multipliers");
  c_st->add_option("--checkpoint", st.checkpoint, "Checkpoint manifest")->required();
  c_st->add_option("--multipliers", st.multipliers, "Comma separated, one per rule");
  c_st->add_option("--cohort", st.cohort, "Cohort for the initial state");
  c_st->add_flag("--frames", st.frames, "Write PNG frames");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (c_sim->parsed()) cmd_simulate(g, sim);
    if (c_train->parsed()) cmd_train(g, train);
    if (c_eval->parsed()) cmd_evaluate(g, eval);
    if (c_pert->parsed()) cmd_perturb(g, pert);
    if (c_abc->parsed()) cmd_abc(g, abc);
    if (c_an->parsed()) cmd_analyze(g, an);
    if (c_sw->parsed()) cmd_sweep(g, sw);
    if (c_st->parsed()) cmd_steer(g, st);
  } catch (const NumericalDivergence& e) {
    std::cerr << "numerical divergence: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
