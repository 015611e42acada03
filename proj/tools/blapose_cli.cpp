#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "blapose/blapose.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace blapose;

namespace {

// JSON run configuration. Top-level scalars set global options; an object
// named after a subcommand sets that subcommand's options. Underscores in
// keys are accepted in place of dashes. Unknown keys are rejected.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    return collect(app, default_also).dump(2) + "\n";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config must be a JSON object");
    std::vector<CLI::ConfigItem> items;
    flatten(j, {}, items);
    return items;
  }

 private:
  static json collect(const CLI::App* app, bool default_also) {
    json out = json::object();
    for (const CLI::Option* opt : app->get_options()) {
      if (!opt->get_configurable() || opt->get_lnames().empty()) continue;
      const std::string& name = opt->get_lnames().front();
      if (opt->count() > 0) {
        const auto& r = opt->results();
        out[name] = r.size() == 1 ? json(r.front()) : json(r);
      } else if (default_also && !opt->get_default_str().empty()) {
        out[name] = opt->get_default_str();
      }
    }
    for (const CLI::App* sub : app->get_subcommands({})) {
      json s = collect(sub, default_also);
      if (!s.empty()) out[sub->get_name()] = s;
    }
    return out;
  }

  static std::string dashed(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return key;
  }

  static std::string scalar(const json& v, const std::string& key) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw CLI::ConversionError("config key '" + key + "' must be a string, number or boolean");
  }

  static void flatten(const json& obj, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : obj.items()) {
      if (value.is_object()) {
        auto nested = parents;
        nested.push_back(dashed(key));
        flatten(value, nested, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = dashed(key);
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v, key));
      } else {
        item.inputs.push_back(scalar(value, key));
      }
      items.push_back(std::move(item));
    }
  }
};

struct Globals {
  std::uint64_t seed = 0;
  bool json = false;
  std::string topology;
  std::string camera;
};

// ---- shared helpers ---------------------------------------------------------

SkeletonTopology resolve_topology(const Globals& g, const json& meta = json::object()) {
  if (!g.topology.empty()) return SkeletonTopology::load(g.topology);
  if (meta.contains("topology")) return SkeletonTopology::from_json(meta.at("topology"));
  return SkeletonTopology::h36m17();
}

CameraIntrinsics resolve_camera(const Globals& g, const json& meta = json::object()) {
  if (!g.camera.empty()) return CameraIntrinsics::load(g.camera);
  if (meta.contains("camera")) return CameraIntrinsics::from_json(meta.at("camera"));
  return h36m_like_camera();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

void save_set(const SequenceSet& set, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_sequence_set(set, path);
}

void emit(const Globals& g, const json& summary) {
  if (g.json) {
    std::cout << summary.dump(2) << '\n';
    return;
  }
  for (const auto& [key, value] : summary.items())
    std::cout << key << ": " << (value.is_string() ? value.get<std::string>() : value.dump()) << '\n';
}

json to_json_vector(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

std::vector<CorpusSequence> require_keypoints(const SequenceSet& set, const std::string& what) {
  if (set.sequences.empty()) throw ValidationError(what + ": no sequences");
  for (const auto& s : set.sequences)
    if (s.keypoints.frames.empty())
      throw ValidationError(what + ": sequence '" + s.poses.info.name + "' has no keypoints");
  return set.sequences;
}

void require_poses(const std::vector<CorpusSequence>& seqs, const std::string& what) {
  for (const auto& s : seqs)
    if (s.poses.frames.empty())
      throw ValidationError(what + ": sequence '" + s.poses.info.name + "' has no 3D poses");
}

void require_lengths(const std::vector<CorpusSequence>& seqs, const std::string& what) {
  for (const auto& s : seqs)
    if (s.lengths.size() == 0)
      throw ValidationError(what + ": sequence '" + s.poses.info.name + "' has no lengths");
}

json carried_metadata(const json& meta, const std::string& kind) {
  json out = json::object();
  for (const char* key : {"camera", "topology", "normalization", "split"})
    if (meta.contains(key)) out[key] = meta.at(key);
  out["kind"] = kind;
  return out;
}

std::pair<std::string, std::string> split_labeled(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos) return {fs::path(arg).stem().string(), arg};
  return {arg.substr(0, eq), arg.substr(eq + 1)};
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

// ---- gen-corpus -------------------------------------------------------------

struct GenCorpusOpts {
  std::string out_dir;
  CorpusConfig cfg;
};

void run_gen_corpus(const Globals& g, GenCorpusOpts o) {
  const SkeletonTopology topo = resolve_topology(g);
  const CameraIntrinsics cam = resolve_camera(g);
  o.cfg.seed = g.seed;
  const Corpus corpus = gen_synthetic_corpus(o.cfg, BodyShapeModel(topo), cam);
  const json config = {{"train_sequences", o.cfg.train_sequences},
                       {"test_sequences", o.cfg.test_sequences},
                       {"frames", o.cfg.frames},
                       {"angular_step", o.cfg.angular_step},
                       {"noise_px", o.cfg.noise_px},
                       {"fps", o.cfg.fps},
                       {"seed", o.cfg.seed}};
  auto make = [&](const std::vector<CorpusSequence>& seqs, const char* split) {
    SequenceSet set{seqs, {{"kind", "corpus"},
                           {"split", split},
                           {"camera", cam.to_json()},
                           {"topology", topo.to_json()},
                           {"normalization", kNormalizationTag},
                           {"generator", config}}};
    return set;
  };
  const fs::path dir(o.out_dir);
  save_set(make(corpus.train, "train"), dir / "train.tb");
  save_set(make(corpus.test, "test"), dir / "test.tb");
  emit(g, {{"train_sequences", corpus.train.size()},
           {"test_sequences", corpus.test.size()},
           {"frames", o.cfg.frames},
           {"files", {(dir / "train.tb").string(), (dir / "test.tb").string()}}});
}

// ---- gen-lengths ------------------------------------------------------------

struct GenLengthsOpts {
  std::string strategy;
  std::string out;
  std::string data;
  std::string input;
  long count = 5000;
  bool align_mean = false;
  bool multiplicative = false;
  bool no_symmetry = false;
  double uniform_range = 0.3;
  double regressor_bias = 0.3;
  double tissue_sd = 0.05;
};

void run_gen_lengths(const Globals& g, const GenLengthsOpts& o) {
  const LengthStrategy strategy = parse_strategy(o.strategy);
  std::vector<CorpusSequence> data;
  json meta = json::object();
  if (!o.data.empty()) {
    SequenceSet set = load_sequence_set(o.data);
    meta = set.metadata;
    data = std::move(set.sequences);
    require_lengths(data, "gen-lengths");
  }
  const SkeletonTopology topo = resolve_topology(g, meta);
  if (o.count < 1) throw ValidationError("gen-lengths: --count must be >= 1");
  if ((strategy != LengthStrategy::synthetic || o.align_mean) && data.empty())
    throw ValidationError("gen-lengths: this strategy needs --data for dataset statistics");

  Rng rng(g.seed);
  LengthBank bank;
  if (strategy == LengthStrategy::synthetic) {
    bank = !o.input.empty() ? load_bank(o.input, topo)
                            : synthetic_mesh_bank(BodyShapeModel(topo), o.count, o.regressor_bias, o.tissue_sd, rng);
  } else {
    const LengthBank dataset = corpus_length_bank(data);
    AugmentationConfig cfg;
    cfg.strategy = strategy;
    cfg.uniform_range = o.uniform_range;
    cfg.enforce_symmetry = !o.no_symmetry;
    cfg.validate();
    Eigen::MatrixXd samples(o.count, topo.bone_count());
    for (long i = 0; i < o.count; ++i) {
      const BoneLengths base = dataset.sample(static_cast<long>(rng.index(static_cast<std::size_t>(dataset.size()))));
      const BoneLengths drawn = strategy == LengthStrategy::uniform
                                    ? gen_lengths_uniform(base, dataset.mean(), topo, cfg, rng)
                                    : gen_lengths_normal(base, dataset.stddev(), topo, cfg, rng);
      samples.row(i) = drawn.transpose();
    }
    bank = LengthBank(std::move(samples), to_string(strategy));
  }
  if (o.align_mean)
    bank = align_bank_mean(bank, corpus_length_bank(data).mean(),
                           o.multiplicative ? MeanAlignment::multiplicative : MeanAlignment::additive);

  const fs::path out(o.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  if (out.extension() == ".csv")
    write_bank_csv(bank, topo, out);
  else
    bank_bundle(bank).save(out);
  emit(g, {{"strategy", to_string(strategy)},
           {"count", bank.size()},
           {"mean_m", to_json_vector(bank.mean())},
           {"std_m", to_json_vector(bank.stddev())},
           {"out", out.string()}});
}

// ---- train ------------------------------------------------------------------

struct TrainOpts {
  std::string data;
  std::string val;
  std::string bank;
  std::string out;
  std::string log;
  std::string strategy = "synthetic";
  int c = 256;
  int c_prime = 512;
  bool unidirectional = false;
  TrainConfig train;
  bool no_flip = false;
  bool no_symmetry = false;
  bool no_augment = false;
  bool no_align = false;
  double shift_sigma = 0.5;
  double uniform_range = 0.3;
  int group_size = 0;
  long bank_size = 5000;
  double regressor_bias = 0.3;
  double tissue_sd = 0.05;
};

void run_train(const Globals& g, TrainOpts o) {
  SequenceSet train_set = load_sequence_set(o.data);
  const SkeletonTopology topo = resolve_topology(g, train_set.metadata);
  const CameraIntrinsics cam = resolve_camera(g, train_set.metadata);
  const std::vector<CorpusSequence> train_seqs = require_keypoints(train_set, "train --data");
  require_lengths(train_seqs, "train --data");
  std::vector<LengthSample> validation;
  if (!o.val.empty()) {
    const SequenceSet val_set = load_sequence_set(o.val);
    const auto val_seqs = require_keypoints(val_set, "train --val");
    require_lengths(val_seqs, "train --val");
    validation = plain_samples(val_seqs, cam);
  }

  ModelDims dims;
  dims.joints = topo.joint_count();
  dims.c = o.c;
  dims.c_prime = o.c_prime;
  dims.bidirectional = !o.unidirectional;
  dims.validate();
  o.train.seed = g.seed + 2;
  o.train.flip = !o.no_flip;

  AugmentationPlan plan;
  plan.config.strategy = parse_strategy(o.strategy);
  plan.config.uniform_range = o.uniform_range;
  plan.config.shift_sigma = o.shift_sigma;
  plan.config.enforce_symmetry = !o.no_symmetry;
  plan.config.seed = g.seed + 1;
  plan.group_size = o.group_size > 0 ? o.group_size : o.train.batch_size;
  if (plan.config.strategy == LengthStrategy::synthetic && !o.no_augment) {
    Rng bank_rng(g.seed + 3);
    LengthBank bank = !o.bank.empty() ? load_bank(o.bank, topo)
                                      : synthetic_mesh_bank(BodyShapeModel(topo), o.bank_size, o.regressor_bias,
                                                            o.tissue_sd, bank_rng);
    if (!o.no_align) bank = align_bank_mean(bank, mean_lengths(train_seqs));
    plan.bank = std::move(bank);
  }
  if (plan.config.strategy == LengthStrategy::normal) plan.sigmas = corpus_length_bank(train_seqs).stddev();

  LengthModelParams params = LengthModelParams::initialized(dims, g.seed);
  TrainResult result;
  if (o.no_augment) {
    result = train(std::move(params), plain_samples(train_seqs, cam), validation, o.train, topo);
  } else {
    result = train(std::move(params), augmented_source(train_seqs, topo, cam, plan), validation, o.train, topo);
  }

  std::ostringstream log;
  log << "epoch,learning_rate,train_loss_mm,val_loss_mm\n";
  for (const auto& e : result.log) {
    char lr[32];
    std::snprintf(lr, sizeof lr, "%.9g", e.learning_rate);
    log << e.epoch << ',' << lr << ',' << format_mm(e.train_loss * 1e3, 6) << ','
        << (std::isnan(e.validation_loss) ? std::string("nan") : format_mm(e.validation_loss * 1e3, 6)) << '\n';
  }

  const fs::path out(o.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_checkpoint(result.params, g.seed, out);
  if (!o.log.empty()) write_text(o.log, log.str());

  json summary = {{"epochs", result.log.size()},
                  {"parameters", result.params.size()},
                  {"strategy", o.no_augment ? "none" : to_string(plan.config.strategy)},
                  {"checkpoint", out.string()}};
  if (!result.log.empty()) {
    summary["final_train_loss_mm"] = result.log.back().train_loss * 1e3;
    if (!std::isnan(result.log.back().validation_loss))
      summary["final_val_loss_mm"] = result.log.back().validation_loss * 1e3;
  }
  emit(g, summary);
}

// ---- predict-lengths --------------------------------------------------------

struct PredictOpts {
  std::string checkpoint;
  std::string data;
  std::string out;
  bool online = false;
  bool no_flip = false;
};

void run_predict(const Globals& g, const PredictOpts& o) {
  const LengthModelParams params = load_checkpoint(o.checkpoint);
  const SequenceSet set = load_sequence_set(o.data);
  const SkeletonTopology topo = resolve_topology(g, set.metadata);
  const CameraIntrinsics cam = resolve_camera(g, set.metadata);
  const auto seqs = require_keypoints(set, "predict-lengths --data");
  if (params.dims().joints != topo.joint_count())
    throw DimensionMismatch("checkpoint joints", topo.joint_count(), params.dims().joints);
  const std::vector<BoneLengths> lengths = o.online ? predict_corpus_lengths_online(params, seqs, cam)
                                                    : predict_corpus_lengths(params, seqs, cam, topo, !o.no_flip);
  SequenceSet out_set;
  out_set.metadata = carried_metadata(set.metadata, "lengths");
  out_set.metadata["online"] = o.online;
  out_set.metadata["flip"] = !o.online && !o.no_flip;
  double err = 0.0;
  bool have_truth = true;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    CorpusSequence s;
    s.poses.info = seqs[i].poses.info;
    s.keypoints.info = seqs[i].poses.info;
    s.lengths = lengths[i];
    out_set.sequences.push_back(std::move(s));
    if (seqs[i].lengths.size() == lengths[i].size())
      err += length_loss(lengths[i], seqs[i].lengths);
    else
      have_truth = false;
  }
  save_set(out_set, o.out);
  json summary = {{"sequences", seqs.size()}, {"online", o.online}, {"out", o.out}};
  if (have_truth) summary["bone_len_err_mm"] = 1e3 * err / static_cast<double>(seqs.size());
  emit(g, summary);
}

// ---- lift-toy ---------------------------------------------------------------

struct LiftOpts {
  std::string mode;
  std::string data;
  std::string lifter;
  std::string out;
  int half_width = 1;
  double ridge = 1e-6;
};

double mean_mpjpe_mm(const std::vector<PoseSequence>& pred, const std::vector<CorpusSequence>& truth) {
  double sum = 0.0;
  long n = 0;
  for (std::size_t s = 0; s < pred.size(); ++s)
    for (long t = 0; t < pred[s].size(); ++t) {
      sum += mpjpe(root_relative(pred[s].frames[t]), root_relative(truth[s].poses.frames[t]));
      ++n;
    }
  return n ? sum / static_cast<double>(n) : 0.0;
}

void run_lift(const Globals& g, const LiftOpts& o) {
  const SequenceSet set = load_sequence_set(o.data);
  const SkeletonTopology topo = resolve_topology(g, set.metadata);
  const CameraIntrinsics cam = resolve_camera(g, set.metadata);
  const auto seqs = require_keypoints(set, "lift-toy --data");
  if (o.mode == "fit") {
    require_poses(seqs, "lift-toy fit --data");
    const ToyLifter lifter = fit_toy_lifter(lift_samples(seqs, cam), topo.joint_count(), o.half_width, o.ridge);
    std::vector<PoseSequence> lifted;
    for (const auto& s : seqs) lifted.push_back(lifter.lift(model_inputs(s.keypoints, cam), s.poses.info));
    const fs::path out(o.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    lifter_bundle(lifter).save(out);
    emit(g, {{"mode", "fit"},
             {"sequences", seqs.size()},
             {"train_mpjpe_mm", mean_mpjpe_mm(lifted, seqs)},
             {"out", out.string()}});
    return;
  }
  if (o.lifter.empty()) throw ValidationError("lift-toy apply needs --lifter");
  const ToyLifter lifter = lifter_from_bundle(TensorBundle::load(o.lifter));
  if (lifter.joints() != topo.joint_count())
    throw DimensionMismatch("lifter joints", topo.joint_count(), lifter.joints());
  SequenceSet out_set;
  out_set.metadata = carried_metadata(set.metadata, "poses");
  for (const auto& s : seqs) {
    CorpusSequence c;
    c.poses = lifter.lift(model_inputs(s.keypoints, cam), s.poses.info);
    out_set.sequences.push_back(std::move(c));
  }
  save_set(out_set, o.out);
  emit(g, {{"mode", "apply"}, {"sequences", seqs.size()}, {"out", o.out}});
}

// ---- adjust -----------------------------------------------------------------

struct AdjustOpts {
  std::string poses;
  std::string lengths;
  std::string out;
};

void run_adjust(const Globals& g, const AdjustOpts& o) {
  const SequenceSet poses = load_sequence_set(o.poses);
  const SequenceSet lengths = load_sequence_set(o.lengths);
  const SkeletonTopology topo = resolve_topology(g, poses.metadata);
  std::map<std::string, const BoneLengths*> by_name;
  for (const auto& s : lengths.sequences) {
    if (s.lengths.size() == 0) throw ValidationError("adjust --lengths: '" + s.poses.info.name + "' has no lengths");
    by_name[s.poses.info.name] = &s.lengths;
  }
  SequenceSet out_set;
  out_set.metadata = carried_metadata(poses.metadata, "poses");
  out_set.metadata["adjusted"] = true;
  for (const auto& s : poses.sequences) {
    const auto it = by_name.find(s.poses.info.name);
    if (it == by_name.end()) throw LabelMismatch("adjust: no lengths for sequence '" + s.poses.info.name + "'");
    if (s.poses.frames.empty()) throw ValidationError("adjust --poses: '" + s.poses.info.name + "' has no poses");
    CorpusSequence c;
    c.poses = adjust_poses(s.poses, *it->second, topo);
    out_set.sequences.push_back(std::move(c));
  }
  save_set(out_set, o.out);
  emit(g, {{"sequences", out_set.sequences.size()}, {"out", o.out}});
}

// ---- eval -------------------------------------------------------------------

struct EvalOpts {
  std::string pred;
  std::string truth;
  std::string out;
  std::string csv;
  bool allow_reflection = false;
};

void run_eval(const Globals& g, const EvalOpts& o) {
  const SequenceSet pred = load_sequence_set(o.pred);
  const SequenceSet truth = load_sequence_set(o.truth);
  const SkeletonTopology topo = resolve_topology(g, truth.metadata);
  require_poses(pred.sequences, "eval --pred");
  require_poses(truth.sequences, "eval --truth");
  const EvaluationReport report = evaluate(poses_of(pred.sequences), poses_of(truth.sequences), topo, o.allow_reflection);
  const json j = report_json(report);
  if (!o.out.empty()) write_text(o.out, j.dump(2) + "\n");
  if (!o.csv.empty()) write_text(o.csv, report_csv(report));
  emit(g, j);
}

// ---- finetune ---------------------------------------------------------------

struct FinetuneOpts {
  std::string lifter;
  std::string checkpoint;
  std::string data;
  std::string val;
  std::string out;
  FinetuneConfig cfg;
  bool no_flip = false;
};

void run_finetune(const Globals& g, FinetuneOpts o) {
  const ToyLifter lifter = lifter_from_bundle(TensorBundle::load(o.lifter));
  const LengthModelParams params = load_checkpoint(o.checkpoint);
  const SequenceSet set = load_sequence_set(o.data);
  const SkeletonTopology topo = resolve_topology(g, set.metadata);
  const CameraIntrinsics cam = resolve_camera(g, set.metadata);
  const auto seqs = require_keypoints(set, "finetune --data");
  require_poses(seqs, "finetune --data");
  if (o.cfg.batch_size < 1 || o.cfg.epochs < 0) throw ValidationError("finetune: bad batch size or epochs");
  o.cfg.seed = g.seed;
  const bool flip = !o.no_flip;
  const auto train_data = finetune_samples(seqs, predict_corpus_lengths(params, seqs, cam, topo, flip), cam);
  std::vector<FinetuneSample> val_data;
  if (!o.val.empty()) {
    const SequenceSet val_set = load_sequence_set(o.val);
    const auto vs = require_keypoints(val_set, "finetune --val");
    require_poses(vs, "finetune --val");
    val_data = finetune_samples(vs, predict_corpus_lengths(params, vs, cam, topo, flip), cam);
  }
  const double before = val_data.empty() ? 0.0 : adjusted_mpjpe(lifter, val_data, topo);
  const FinetuneResult result = finetune_toy_lifter(lifter, train_data, o.cfg, topo);
  const fs::path out(o.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  lifter_bundle(result.lifter).save(out);
  json losses = json::array();
  for (double l : result.epoch_loss) losses.push_back(l * 1e3);
  json summary = {{"epochs", result.epoch_loss.size()}, {"epoch_loss_mm", losses}, {"out", out.string()}};
  if (!val_data.empty()) {
    summary["val_adjusted_mpjpe_before_mm"] = before;
    summary["val_adjusted_mpjpe_after_mm"] = adjusted_mpjpe(result.lifter, val_data, topo);
  }
  emit(g, summary);
}

// ---- bench ------------------------------------------------------------------

struct BenchOpts {
  std::string checkpoint;
  std::string lifter;
  std::string data;
  std::string out;
  long repetitions = 10000;
};

void run_bench(const Globals& g, const BenchOpts& o) {
  Eigen::setNbThreads(1);
  const LengthModelParams params = load_checkpoint(o.checkpoint);
  if (params.dims().bidirectional) throw ValidationError("bench: the online benchmark needs a unidirectional checkpoint");
  const ToyLifter lifter = lifter_from_bundle(TensorBundle::load(o.lifter));
  const SequenceSet set = load_sequence_set(o.data);
  const SkeletonTopology topo = resolve_topology(g, set.metadata);
  const CameraIntrinsics cam = resolve_camera(g, set.metadata);
  const auto seqs = require_keypoints(set, "bench --data");
  if (o.repetitions < 0) throw ValidationError("bench: --repetitions must be >= 0");
  const Eigen::MatrixXd frames = model_inputs(seqs.front().keypoints, cam);
  const json j = bench_json(bench_online(params, frames, o.repetitions, lifter, topo));
  if (!o.out.empty()) write_text(o.out, j.dump(2) + "\n");
  emit(g, j);
}

// ---- report -----------------------------------------------------------------

struct ReportOpts {
  std::vector<std::string> inputs;
  std::vector<std::string> curves;
  std::string metric = "mpjpe";
  std::string format = "markdown";
  std::string title;
  std::string out;
};

Metric parse_metric(const std::string& s) {
  if (s == "mpjpe") return Metric::mpjpe;
  if (s == "p-mpjpe" || s == "p_mpjpe") return Metric::p_mpjpe;
  if (s == "bone") return Metric::bone_length;
  throw ValidationError("unknown metric '" + s + "'");
}

std::vector<double> read_curve(const fs::path& path, const std::string& column) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path.string() + ": empty log");
  std::vector<std::string> header;
  std::stringstream hs(line);
  for (std::string cell; std::getline(hs, cell, ',');) header.push_back(cell);
  const auto col = std::find(header.begin(), header.end(), column);
  if (col == header.end()) throw SchemaError(path.string() + ": no column '" + column + "'");
  const auto index = static_cast<std::size_t>(col - header.begin());
  std::vector<double> values;
  while (std::getline(in, line)) {
    std::stringstream ls(line);
    std::vector<std::string> cells;
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    if (cells.size() != header.size()) throw SchemaError(path.string() + ": ragged row");
    values.push_back(cells[index] == "nan" ? std::nan("") : std::stod(cells[index]));
  }
  return values;
}

void run_report(const Globals& g, const ReportOpts& o) {
  const Metric metric = parse_metric(o.metric);
  std::vector<std::pair<std::string, EvaluationReport>> rows;
  for (const auto& arg : o.inputs) {
    auto [label, path] = split_labeled(arg);
    rows.emplace_back(label, report_from_json(read_json_file(path)));
  }
  const std::string title = !o.title.empty() ? o.title : (rows.empty() ? "training curves" : o.metric);
  std::string text;
  if (o.format == "markdown") {
    if (rows.empty()) throw ValidationError("report: markdown needs at least one --input");
    text = report_markdown(rows, metric, title);
  } else if (o.format == "csv") {
    if (rows.empty()) throw ValidationError("report: csv needs at least one --input");
    std::ostringstream out;
    out << "label,action,frames,mpjpe_mm,p_mpjpe_mm,bone_len_err_mm\n";
    for (const auto& [label, r] : rows) {
      std::istringstream body(report_csv(r));
      std::string line;
      std::getline(body, line);
      while (std::getline(body, line)) out << label << ',' << line << '\n';
    }
    text = out.str();
  } else if (o.format == "svg") {
    if (!rows.empty() && !o.curves.empty()) throw ValidationError("report: svg takes --input or --curve, not both");
    if (!rows.empty()) {
      std::vector<std::string> actions;
      for (const auto& m : rows.front().second.actions) actions.push_back(m.action);
      actions.push_back("Average");
      std::vector<svg::Series> series;
      for (const auto& [label, r] : rows) {
        svg::Series s{label, {}};
        for (std::size_t a = 0; a + 1 < actions.size(); ++a) {
          double v = 0.0;
          for (const auto& m : r.actions)
            if (m.action == actions[a]) v = metric_of(m, metric);
          s.values.push_back(v);
        }
        s.values.push_back(metric_of(r.overall, metric));
        series.push_back(std::move(s));
      }
      text = svg::bar_chart(title, actions, series, o.metric + " (mm)");
    } else if (!o.curves.empty()) {
      std::vector<svg::Series> series;
      for (const auto& arg : o.curves) {
        auto [label, path] = split_labeled(arg);
        series.push_back({label + " train", read_curve(path, "train_loss_mm")});
        series.push_back({label + " val", read_curve(path, "val_loss_mm")});
      }
      text = svg::line_chart(title, series, "epoch", "bone length error (mm)");
    } else {
      throw ValidationError("report: svg needs --input or --curve");
    }
  } else {
    throw ValidationError("unknown report format '" + o.format + "'");
  }
  write_text(o.out, text);
  emit(g, {{"format", o.format}, {"rows", rows.size()}, {"out", o.out}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bone-length estimation and pose adjustment toolkit", "blapose_cli"};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON run configuration (top-level globals, one object per subcommand)");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);

  Globals g;
  app.add_option("--seed", g.seed, "Master random seed")->capture_default_str();
  app.add_flag("--json", g.json, "Print a JSON summary on standard output");
  app.add_option("--topology", g.topology, "Skeleton topology JSON")->check(CLI::ExistingFile);
  app.add_option("--camera", g.camera, "Camera intrinsics JSON")->check(CLI::ExistingFile);

  auto sub = [&](const char* name, const char* help) {
    CLI::App* s = app.add_subcommand(name, help);
    s->fallthrough();
    return s;
  };
  std::function<void()> action;

  GenCorpusOpts gc;
  auto* s_gc = sub("gen-corpus", "Generate a synthetic train/test corpus");
  s_gc->add_option("--out-dir", gc.out_dir, "Output directory")->required();
  s_gc->add_option("--train-sequences", gc.cfg.train_sequences)->capture_default_str();
  s_gc->add_option("--test-sequences", gc.cfg.test_sequences)->capture_default_str();
  s_gc->add_option("--frames", gc.cfg.frames)->capture_default_str();
  s_gc->add_option("--angular-step", gc.cfg.angular_step, "Max per-frame bone rotation (rad)")->capture_default_str();
  s_gc->add_option("--noise-px", gc.cfg.noise_px, "2D Gaussian noise sigma (pixels)")->capture_default_str();
  s_gc->add_option("--fps", gc.cfg.fps)->capture_default_str();
  s_gc->callback([&] { action = [&] { run_gen_corpus(g, gc); }; });

  GenLengthsOpts gl;
  auto* s_gl = sub("gen-lengths", "Build a bone-length bank");
  s_gl->add_option("--strategy", gl.strategy)->required()->check(CLI::IsMember({"uniform", "normal", "synthetic"}));
  s_gl->add_option("--out", gl.out, "Output bank (.csv or bundle)")->required();
  s_gl->add_option("--data", gl.data, "Corpus bundle for dataset statistics")->check(CLI::ExistingFile);
  s_gl->add_option("--input", gl.input, "Existing bank to align (synthetic)")->check(CLI::ExistingFile);
  s_gl->add_option("--count", gl.count)->capture_default_str();
  s_gl->add_flag("--align-mean", gl.align_mean, "Shift the bank mean onto the dataset mean");
  s_gl->add_flag("--multiplicative", gl.multiplicative, "Scale instead of shift when aligning");
  s_gl->add_flag("--no-symmetry", gl.no_symmetry);
  s_gl->add_option("--uniform-range", gl.uniform_range)->capture_default_str();
  s_gl->add_option("--regressor-bias", gl.regressor_bias)->capture_default_str();
  s_gl->add_option("--tissue-sd", gl.tissue_sd)->capture_default_str();
  s_gl->callback([&] { action = [&] { run_gen_lengths(g, gl); }; });

  TrainOpts tr;
  auto* s_tr = sub("train", "Train the bone-length model");
  s_tr->add_option("--data", tr.data, "Training corpus bundle")->required()->check(CLI::ExistingFile);
  s_tr->add_option("--val", tr.val, "Validation corpus bundle")->check(CLI::ExistingFile);
  s_tr->add_option("--bank", tr.bank, "Length bank for the synthetic strategy")->check(CLI::ExistingFile);
  s_tr->add_option("--out", tr.out, "Checkpoint path")->required();
  s_tr->add_option("--log", tr.log, "Per-epoch CSV log");
  s_tr->add_option("--strategy", tr.strategy)->check(CLI::IsMember({"uniform", "normal", "synthetic"}))->capture_default_str();
  s_tr->add_option("--c", tr.c, "Projected input width")->capture_default_str();
  s_tr->add_option("--c-prime", tr.c_prime, "GRU hidden width")->capture_default_str();
  s_tr->add_flag("--unidirectional", tr.unidirectional);
  s_tr->add_option("--sequence-length", tr.train.sequence_length)->capture_default_str();
  s_tr->add_option("--batch-size", tr.train.batch_size)->capture_default_str();
  s_tr->add_option("--lr", tr.train.learning_rate)->capture_default_str();
  s_tr->add_option("--lr-decay", tr.train.lr_decay)->capture_default_str();
  s_tr->add_option("--epochs", tr.train.epochs)->capture_default_str();
  s_tr->add_flag("--no-flip", tr.no_flip);
  s_tr->add_flag("--no-symmetry", tr.no_symmetry);
  s_tr->add_flag("--no-augment", tr.no_augment, "Train on the stored keypoints and lengths");
  s_tr->add_flag("--no-align", tr.no_align, "Use the bank without shifting its mean");
  s_tr->add_option("--shift-sigma", tr.shift_sigma)->capture_default_str();
  s_tr->add_option("--uniform-range", tr.uniform_range)->capture_default_str();
  s_tr->add_option("--group-size", tr.group_size, "Sequences sharing one batch mean (default: batch size)");
  s_tr->add_option("--bank-size", tr.bank_size)->capture_default_str();
  s_tr->add_option("--regressor-bias", tr.regressor_bias)->capture_default_str();
  s_tr->add_option("--tissue-sd", tr.tissue_sd)->capture_default_str();
  s_tr->callback([&] { action = [&] { run_train(g, tr); }; });

  PredictOpts pr;
  auto* s_pr = sub("predict-lengths", "Predict per-sequence bone lengths");
  s_pr->add_option("--checkpoint", pr.checkpoint)->required()->check(CLI::ExistingFile);
  s_pr->add_option("--data", pr.data)->required()->check(CLI::ExistingFile);
  s_pr->add_option("--out", pr.out)->required();
  s_pr->add_flag("--online", pr.online, "Frame-by-frame inference; keeps the last frame's estimate");
  s_pr->add_flag("--no-flip", pr.no_flip);
  s_pr->callback([&] { action = [&] { run_predict(g, pr); }; });

  LiftOpts lf;
  auto* s_lf = sub("lift-toy", "Fit or apply the linear toy lifter");
  s_lf->add_option("mode", lf.mode)->required()->check(CLI::IsMember({"fit", "apply"}));
  s_lf->add_option("--data", lf.data)->required()->check(CLI::ExistingFile);
  s_lf->add_option("--lifter", lf.lifter, "Lifter bundle (apply)")->check(CLI::ExistingFile);
  s_lf->add_option("--out", lf.out)->required();
  s_lf->add_option("--half-width", lf.half_width, "Temporal window half width")->capture_default_str();
  s_lf->add_option("--ridge", lf.ridge)->capture_default_str();
  s_lf->callback([&] { action = [&] { run_lift(g, lf); }; });

  AdjustOpts ad;
  auto* s_ad = sub("adjust", "Replace bone lengths of predicted poses");
  s_ad->add_option("--poses", ad.poses)->required()->check(CLI::ExistingFile);
  s_ad->add_option("--lengths", ad.lengths)->required()->check(CLI::ExistingFile);
  s_ad->add_option("--out", ad.out)->required();
  s_ad->callback([&] { action = [&] { run_adjust(g, ad); }; });

  EvalOpts ev;
  auto* s_ev = sub("eval", "Per-action MPJPE, P-MPJPE and bone-length error");
  s_ev->add_option("--pred", ev.pred)->required()->check(CLI::ExistingFile);
  s_ev->add_option("--truth", ev.truth)->required()->check(CLI::ExistingFile);
  s_ev->add_option("--out", ev.out, "Report JSON");
  s_ev->add_option("--csv", ev.csv, "Report CSV");
  s_ev->add_flag("--allow-reflection", ev.allow_reflection);
  s_ev->callback([&] { action = [&] { run_eval(g, ev); }; });

  FinetuneOpts ft;
  auto* s_ft = sub("finetune", "Fine-tune the toy lifter with frozen lengths");
  s_ft->add_option("--lifter", ft.lifter)->required()->check(CLI::ExistingFile);
  s_ft->add_option("--checkpoint", ft.checkpoint)->required()->check(CLI::ExistingFile);
  s_ft->add_option("--data", ft.data)->required()->check(CLI::ExistingFile);
  s_ft->add_option("--val", ft.val)->check(CLI::ExistingFile);
  s_ft->add_option("--out", ft.out)->required();
  s_ft->add_option("--lr", ft.cfg.learning_rate)->capture_default_str();
  s_ft->add_option("--lr-decay", ft.cfg.lr_decay)->capture_default_str();
  s_ft->add_option("--batch-size", ft.cfg.batch_size)->capture_default_str();
  s_ft->add_option("--epochs", ft.cfg.epochs)->capture_default_str();
  s_ft->add_flag("--no-flip", ft.no_flip);
  s_ft->callback([&] { action = [&] { run_finetune(g, ft); }; });

  BenchOpts bn;
  auto* s_bn = sub("bench", "Single-thread online inference timing");
  s_bn->add_option("--checkpoint", bn.checkpoint, "Unidirectional checkpoint")->required()->check(CLI::ExistingFile);
  s_bn->add_option("--lifter", bn.lifter)->required()->check(CLI::ExistingFile);
  s_bn->add_option("--data", bn.data)->required()->check(CLI::ExistingFile);
  s_bn->add_option("--repetitions", bn.repetitions)->capture_default_str();
  s_bn->add_option("--out", bn.out, "Timing JSON");
  s_bn->callback([&] { action = [&] { run_bench(g, bn); }; });

  ReportOpts rp;
  auto* s_rp = sub("report", "Tables and plots from evaluation reports");
  s_rp->add_option("--input", rp.inputs, "label=report.json (repeatable)");
  s_rp->add_option("--curve", rp.curves, "label=train_log.csv (repeatable, svg)");
  s_rp->add_option("--metric", rp.metric)->check(CLI::IsMember({"mpjpe", "p-mpjpe", "p_mpjpe", "bone"}))->capture_default_str();
  s_rp->add_option("--format", rp.format)->check(CLI::IsMember({"markdown", "csv", "svg"}))->capture_default_str();
  s_rp->add_option("--title", rp.title);
  s_rp->add_option("--out", rp.out)->required();
  s_rp->callback([&] { action = [&] { run_report(g, rp); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  if (!action) return 1;
  try {
    action();
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
