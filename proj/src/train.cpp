#include "siamtrack/train.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "siamtrack/config.hpp"
#include "siamtrack/kernels.hpp"

namespace siamtrack {

namespace {

using json = nlohmann::json;

bool is_detector_tensor(const std::string& name) { return name.rfind("detector_head.", 0) == 0; }

// Hex floats keep resume state exact through the JSON header.
std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

double parse_hexfloat(const std::string& s) { return std::strtod(s.c_str(), nullptr); }

std::string csv_number(double v) {
  std::ostringstream os;
  os << std::setprecision(9) << v;
  return os.str();
}

template <typename T>
void pointwise_backward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& grad_out,
                        Tensor<T>* grad_in, Tensor<T>& grad_weight, Tensor<T>& grad_bias) {
  const auto g = kernels::ConvGeometry::same(input.dim(0), input.dim(1), input.dim(2), weight.dim(0), 1, 1);
  std::span<T> gi;
  if (grad_in) {
    if (!grad_in->same_shape(input)) *grad_in = Tensor<T>(input.shape());
    gi = grad_in->span();
  }
  kernels::conv2d_backward<T>(g, input.span(), weight.span(), grad_out.span(), gi, grad_weight.span(),
                              grad_bias.span());
}

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

bool finite(const LossTerms& t) {
  return std::isfinite(t.total) && std::isfinite(t.heat) && std::isfinite(t.offset) && std::isfinite(t.detector);
}

struct LossAccumulator {
  LossTerms sum;
  int count = 0;

  void add(const LossTerms& t) {
    sum.total += t.total;
    sum.heat += t.heat;
    sum.offset += t.offset;
    sum.detector += t.detector;
    ++count;
  }
  LossTerms mean() const {
    if (count == 0) return {};
    const double n = count;
    return {sum.heat / n, sum.offset / n, sum.detector / n, sum.total / n};
  }
};

std::filesystem::path checkpoint_path(const std::filesystem::path& run_dir, int step) {
  char name[32];
  std::snprintf(name, sizeof(name), "step_%08d.ckpt", step);
  return run_dir / "checkpoints" / name;
}

json rows_to_json(const std::vector<MetricRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({r.step, hexfloat(r.loss.total), hexfloat(r.loss.heat), hexfloat(r.loss.offset),
                   hexfloat(r.loss.detector), hexfloat(r.robustness), hexfloat(r.accuracy)});
  }
  return out;
}

std::vector<MetricRow> rows_from_json(const json& j) {
  std::vector<MetricRow> rows;
  for (const auto& e : j) {
    MetricRow r;
    r.step = e.at(0).get<int>();
    r.loss.total = parse_hexfloat(e.at(1).get<std::string>());
    r.loss.heat = parse_hexfloat(e.at(2).get<std::string>());
    r.loss.offset = parse_hexfloat(e.at(3).get<std::string>());
    r.loss.detector = parse_hexfloat(e.at(4).get<std::string>());
    r.robustness = parse_hexfloat(e.at(5).get<std::string>());
    r.accuracy = parse_hexfloat(e.at(6).get<std::string>());
    rows.push_back(r);
  }
  return rows;
}

// The run seed also decides the initialization.
BackboneConfig run_backbone(const TrainConfig& cfg) {
  BackboneConfig b = cfg.backbone;
  b.init_seed = mix_seed(cfg.seed, cfg.backbone.init_seed);
  return b;
}

struct TrainState {
  int step = 0;
  Parameters<float> params;
  AdamState adam;
  LossAccumulator interval;
  std::vector<MetricRow> rows;
};

Checkpoint make_checkpoint(const TrainConfig& cfg, const TrainState& s) {
  Checkpoint ck;
  ck.config = run_backbone(cfg);
  ck.step = s.step;
  ck.params = s.params;
  s.adam.m.for_each([&](const std::string& name, const Tensor<float>& t) { ck.extra["adam.m." + name] = t; });
  s.adam.v.for_each([&](const std::string& name, const Tensor<float>& t) { ck.extra["adam.v." + name] = t; });
  ck.metadata["variant"] = to_string(cfg.variant);
  ck.metadata["seed"] = std::to_string(cfg.seed);
  ck.metadata["train_config"] = train_config_to_string(cfg);
  ck.metadata["adam_t"] = std::to_string(s.adam.t);
  ck.metadata["interval"] = json::array({hexfloat(s.interval.sum.total), hexfloat(s.interval.sum.heat),
                                         hexfloat(s.interval.sum.offset), hexfloat(s.interval.sum.detector),
                                         s.interval.count})
                                .dump();
  ck.metadata["rows"] = rows_to_json(s.rows).dump();
  return ck;
}

TrainState restore_state(const TrainConfig& cfg, const Checkpoint& ck) {
  if (!(ck.config == run_backbone(cfg))) throw std::invalid_argument("resume: checkpoint backbone differs from config");
  auto meta = [&](const std::string& key) -> const std::string& {
    auto it = ck.metadata.find(key);
    if (it == ck.metadata.end()) throw std::invalid_argument("resume: checkpoint lacks '" + key + "'");
    return it->second;
  };
  if (meta("variant") != to_string(cfg.variant) || meta("seed") != std::to_string(cfg.seed)) {
    throw std::invalid_argument("resume: checkpoint variant/seed differ from the requested run");
  }
  if (meta("train_config") != train_config_to_string(cfg)) {
    throw std::invalid_argument("resume: checkpoint was written with a different training config");
  }
  TrainState s;
  s.step = static_cast<int>(ck.step);
  s.params = ck.params;
  s.adam.m = Parameters<float>::zeros(cfg.backbone);
  s.adam.v = Parameters<float>::zeros(cfg.backbone);
  auto load_moment = [&](const std::string& prefix, Parameters<float>& p) {
    p.for_each([&](const std::string& name, Tensor<float>& t) {
      auto it = ck.extra.find(prefix + name);
      if (it == ck.extra.end() || !it->second.same_shape(t)) {
        throw std::invalid_argument("resume: missing optimizer state for " + name);
      }
      t = it->second;
    });
  };
  load_moment("adam.m.", s.adam.m);
  load_moment("adam.v.", s.adam.v);
  s.adam.t = std::stoll(meta("adam_t"));
  const json interval = json::parse(meta("interval"));
  s.interval.sum.total = parse_hexfloat(interval.at(0).get<std::string>());
  s.interval.sum.heat = parse_hexfloat(interval.at(1).get<std::string>());
  s.interval.sum.offset = parse_hexfloat(interval.at(2).get<std::string>());
  s.interval.sum.detector = parse_hexfloat(interval.at(3).get<std::string>());
  s.interval.count = interval.at(4).get<int>();
  s.rows = rows_from_json(json::parse(meta("rows")));
  return s;
}

}  // namespace

Variant variant_from_string(const std::string& name) {
  if (name == "with_detector") return Variant::with_detector;
  if (name == "no_detector") return Variant::no_detector;
  throw std::invalid_argument("unknown variant '" + name + "' (expected with_detector or no_detector)");
}

std::string to_string(Variant variant) { return variant == Variant::with_detector ? "with_detector" : "no_detector"; }

int TrainConfig::lr_drop_step() const {
  // floor keeps the drop strictly inside short runs; the guard absorbs 0.95 * 2000 = 1899.999...
  return static_cast<int>(std::floor(lr_drop_fraction * total_steps + 1e-9));
}

void TrainConfig::validate() const {
  if (total_steps < 0) throw std::invalid_argument("train: total_steps must be >= 0");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning_rate must be > 0");
  if (!(lr_drop_fraction > 0.0 && lr_drop_fraction <= 1.0)) {
    throw std::invalid_argument("train: lr_drop_fraction must lie in (0, 1]");
  }
  if (!(lr_drop_factor > 0.0)) throw std::invalid_argument("train: lr_drop_factor must be > 0");
  if (total_steps > 0 && lr_drop_fraction < 1.0 && lr_drop_step() >= total_steps) {
    throw std::invalid_argument("train: learning-rate drop must happen before the last step");
  }
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw std::invalid_argument("train: Adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw std::invalid_argument("train: adam_epsilon must be > 0");
  if (eval_every < 0 || checkpoint_every < 0) throw std::invalid_argument("train: cadences must be >= 0");
  if (weights.heatmap < 0.0 || weights.offset < 0.0 || weights.detector < 0.0) {
    throw std::invalid_argument("train: loss weights must be >= 0");
  }
  backbone.validate();
  eval.validate();
  select.validate();
  if (geometry.target_size != backbone.target_size || geometry.search_size != backbone.search_size) {
    throw std::invalid_argument("train: crop geometry and backbone sizes disagree");
  }
  if (geometry.stride != BackboneConfig::kStride) throw std::invalid_argument("train: stride must match the backbone");
  if (sampler.subsequence_length < 1) throw std::invalid_argument("train: subsequence_length must be >= 1");
}

void apply_head_prior(Parameters<float>& params, const CropGeometry& geom) {
  const int g = geom.grid();
  const Tensor<float> disc = disc_target(Point{0.5 * (g - 1), 0.5 * (g - 1)}, g, geom.disc_radius);
  double positives = 0.0;
  for (float v : disc.values()) positives += v;
  const double p = positives / (static_cast<double>(g) * g);
  const float logit = static_cast<float>(std::log(p / (1.0 - p)));
  // A square box fills 1 / (2 * search_ratio) of the search side.
  const float half = static_cast<float>(geom.search_size / (4.0 * geom.search_ratio) / geom.stride);
  auto& tb = params.tracker_bias.values();
  tb[kHeatBackground] = 0.0f;
  tb[kHeatTarget] = logit;
  tb[kOffsetTlX] = -half;
  tb[kOffsetTlY] = -half;
  tb[kOffsetBrX] = half;
  tb[kOffsetBrY] = half;
  auto& db = params.detector_bias.values();
  db[kHeatBackground] = 0.0f;
  db[kHeatTarget] = logit;
}

double lr_at(int step, const TrainConfig& cfg) {
  return step < cfg.lr_drop_step() ? cfg.learning_rate : cfg.learning_rate * cfg.lr_drop_factor;
}

template <typename T>
LossTerms example_loss(const Parameters<T>& params, const BackboneConfig& cfg, const TrainingExample& ex,
                       const LossWeights& weights, bool with_detector, Parameters<T>* grads) {
  const Encoding<T> target = encode(params, cfg, image_to_tensor<T>(ex.target_crop), Branch::target);
  const Encoding<T> search = encode(params, cfg, image_to_tensor<T>(ex.search_crop), Branch::search);
  const Tensor<T> joined = cross_convolve(target.features(), search.features());
  const Tensor<T> out = tracker_head(params, joined);
  Tensor<T> grad_out;
  const LossTerms tracker_terms =
      tracker_loss(out, ex.search_heat, ex.search_offsets, weights, grads ? &grad_out : nullptr);

  double detector_ce = 0.0;
  std::optional<Encoding<T>> det;
  Tensor<T> det_joined, det_grad_out;
  if (with_detector) {
    det.emplace(encode(params, cfg, image_to_tensor<T>(ex.detector_frame), Branch::detector));
    det_joined = cross_convolve(target.features(), det->features());
    const Tensor<T> det_out = detector_head(params, det_joined);
    if (grads) det_grad_out = Tensor<T>(det_out.shape());
    detector_ce =
        heatmap_cross_entropy(det_out, ex.detector_heat, grads ? &det_grad_out : nullptr, weights.detector);
  }
  const LossTerms terms = joint_loss(tracker_terms, with_detector ? detector_ce : 0.0, weights);
  if (!grads) return terms;

  Tensor<T> grad_joined;
  pointwise_backward(joined, params.tracker_weight, grad_out, &grad_joined, grads->tracker_weight,
                     grads->tracker_bias);
  Tensor<T> grad_target, grad_search;
  cross_convolve_backward(target.features(), search.features(), grad_joined, grad_target, grad_search);
  if (with_detector) {
    Tensor<T> grad_det_joined;
    pointwise_backward(det_joined, params.detector_weight, det_grad_out, &grad_det_joined, grads->detector_weight,
                       grads->detector_bias);
    Tensor<T> grad_target_det, grad_det;
    cross_convolve_backward(target.features(), det->features(), grad_det_joined, grad_target_det, grad_det);
    add_into(grad_target, grad_target_det);
    encode_backward(params, cfg, *det, grad_det, *grads);
  }
  encode_backward(params, cfg, search, grad_search, *grads);
  encode_backward(params, cfg, target, grad_target, *grads);
  return terms;
}

template LossTerms example_loss<float>(const Parameters<float>&, const BackboneConfig&, const TrainingExample&,
                                       const LossWeights&, bool, Parameters<float>*);
template LossTerms example_loss<double>(const Parameters<double>&, const BackboneConfig&, const TrainingExample&,
                                        const LossWeights&, bool, Parameters<double>*);

std::vector<TrainingExample> make_batch(const std::vector<Sequence>& dataset, const TrainConfig& cfg, int step) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  const int n = cfg.batch_size;
  std::vector<TrainingExample> batch(n);
  std::exception_ptr error;
#pragma omp parallel for schedule(static)
  for (int b = 0; b < n; ++b) {
    try {
      Rng rng(mix_seed(mix_seed(cfg.seed, static_cast<std::uint64_t>(step)), static_cast<std::uint64_t>(b)));
      const std::size_t index = std::uniform_int_distribution<std::size_t>(0, dataset.size() - 1)(rng);
      batch[b] = sample_training_example(dataset[index], cfg.sampler, cfg.geometry, rng);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return batch;
}

void adam_update(Parameters<float>& params, const Parameters<float>& grads, AdamState& state, double lr,
                 const TrainConfig& cfg, bool skip_detector) {
  ++state.t;
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  std::vector<Tensor<float>*> p, m, v;
  std::vector<const Tensor<float>*> g;
  std::vector<std::string> names;
  params.for_each([&](const std::string& name, Tensor<float>& t) {
    names.push_back(name);
    p.push_back(&t);
  });
  const_cast<Parameters<float>&>(grads).for_each([&](const std::string&, Tensor<float>& t) { g.push_back(&t); });
  state.m.for_each([&](const std::string&, Tensor<float>& t) { m.push_back(&t); });
  state.v.for_each([&](const std::string&, Tensor<float>& t) { v.push_back(&t); });
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (skip_detector && is_detector_tensor(names[k])) continue;
    Tensor<float>& pk = *p[k];
    const Tensor<float>& gk = *g[k];
    Tensor<float>& mk = *m[k];
    Tensor<float>& vk = *v[k];
    for (std::size_t i = 0; i < pk.size(); ++i) {
      const double gi = gk[i];
      const double mi = b1 * mk[i] + (1.0 - b1) * gi;
      const double vi = b2 * vk[i] + (1.0 - b2) * gi * gi;
      mk[i] = static_cast<float>(mi);
      vk[i] = static_cast<float>(vi);
      pk[i] = static_cast<float>(pk[i] - lr * (mi / c1) / (std::sqrt(vi / c2) + cfg.adam_epsilon));
    }
  }
}

RunRecord train_run(const TrainConfig& cfg, const std::vector<Sequence>& train_data,
                    const std::vector<Sequence>& eval_data, const TrainOptions& options) {
  cfg.validate();
  if (train_data.empty()) throw std::invalid_argument("train: training dataset is empty");
  const bool with_detector = cfg.variant == Variant::with_detector;
  const bool write = !options.run_dir.empty();

  TrainState s;
  if (options.resume) {
    s = restore_state(cfg, load_checkpoint(*options.resume));
    if (s.step > cfg.total_steps) throw std::invalid_argument("resume: checkpoint is past total_steps");
  } else {
    s.params = init_parameters(run_backbone(cfg));
    apply_head_prior(s.params, cfg.geometry);
    s.adam.m = Parameters<float>::zeros(cfg.backbone);
    s.adam.v = Parameters<float>::zeros(cfg.backbone);
  }

  RunRecord record;
  record.variant = to_string(cfg.variant);
  record.seed = cfg.seed;
  record.config_json = train_config_to_string(cfg);
  if (write) {
    std::filesystem::create_directories(options.run_dir / "checkpoints");
    std::ofstream(options.run_dir / "config.json", std::ios::trunc) << record.config_json << "\n";
  }

  auto save = [&]() {
    if (!write) return;
    const auto path = checkpoint_path(options.run_dir, s.step);
    save_checkpoint(path, make_checkpoint(cfg, s));
    record.checkpoints.push_back(path);
  };
  auto evaluate_row = [&](const LossTerms& loss) {
    MetricRow row;
    row.step = s.step;
    row.loss = loss;
    if (!eval_data.empty()) {
      const TrackerModel model{cfg.backbone, s.params};
      const EvalResult r = supervised_evaluate(model, eval_data, cfg.geometry, cfg.eval, cfg.select);
      row.robustness = r.robustness;
      row.accuracy = r.accuracy;
    }
    s.rows.push_back(row);
    if (options.verbose) {
      std::cerr << "[" << record.variant << " seed " << cfg.seed << "] step " << row.step << " loss "
                << row.loss.total << " R " << row.robustness << " A " << row.accuracy << std::endl;
    }
  };
  auto batch_loss = [&](int step, Parameters<float>* grads) {
    const std::vector<TrainingExample> batch = make_batch(train_data, cfg, step);
    const int n = static_cast<int>(batch.size());
    std::vector<LossTerms> terms(n);
    std::vector<Parameters<float>> per_example;
    if (grads) per_example.assign(n, Parameters<float>::zeros(cfg.backbone));
    std::exception_ptr error;
#pragma omp parallel for schedule(static)
    for (int b = 0; b < n; ++b) {
      try {
        terms[b] = example_loss(s.params, cfg.backbone, batch[b], cfg.weights, with_detector,
                                grads ? &per_example[b] : nullptr);
      } catch (...) {
#pragma omp critical
        if (!error) error = std::current_exception();
      }
    }
    if (error) std::rethrow_exception(error);
    // Fixed reduction order keeps the result independent of the thread count.
    LossAccumulator acc;
    for (int b = 0; b < n; ++b) acc.add(terms[b]);
    if (grads) {
      const float inv = 1.0f / static_cast<float>(n);
      std::vector<Tensor<float>*> dst;
      grads->for_each([&](const std::string&, Tensor<float>& t) { dst.push_back(&t); });
      for (int b = 0; b < n; ++b) {
        std::size_t k = 0;
        per_example[b].for_each([&](const std::string&, Tensor<float>& t) { add_into(*dst[k++], t); });
      }
      for (auto* t : dst) {
        for (std::size_t i = 0; i < t->size(); ++i) (*t)[i] *= inv;
      }
    }
    return acc.mean();
  };
  auto abort_nonfinite = [&](const LossTerms& loss) {
    std::ostringstream msg;
    msg << "non-finite loss at step " << s.step << " (total " << loss.total << ", heat " << loss.heat << ", offset "
        << loss.offset << ", detector " << loss.detector << ")";
    if (write) {
      const auto path = options.run_dir / "nonfinite.ckpt";
      Checkpoint ck = make_checkpoint(cfg, s);
      ck.metadata["error"] = msg.str();
      save_checkpoint(path, ck);
      msg << "; state written to " << path.string();
    }
    throw NonFiniteLoss(msg.str());
  };

  if (!options.resume) {
    // Row 0: loss of the first batch at initialization, no update.
    const LossTerms initial = batch_loss(0, nullptr);
    if (!finite(initial)) abort_nonfinite(initial);
    evaluate_row(initial);
    save();
  }

  while (s.step < cfg.total_steps) {
    Parameters<float> grads = Parameters<float>::zeros(cfg.backbone);
    const LossTerms loss = batch_loss(s.step, &grads);
    if (!finite(loss)) abort_nonfinite(loss);
    adam_update(s.params, grads, s.adam, lr_at(s.step, cfg), cfg, !with_detector);
    s.interval.add(loss);
    ++s.step;
    const bool eval_point = s.step == cfg.total_steps || (cfg.eval_every > 0 && s.step % cfg.eval_every == 0);
    if (eval_point) {
      evaluate_row(s.interval.mean());
      s.interval = {};
      save();
    } else if (cfg.checkpoint_every > 0 && s.step % cfg.checkpoint_every == 0) {
      save();
    }
  }

  record.rows = s.rows;
  if (write) write_metrics_csv(options.run_dir / "metrics.csv", record);
  return record;
}

TrackerModel model_from_checkpoint(const std::filesystem::path& path) {
  Checkpoint ck = load_checkpoint(path);
  return TrackerModel{ck.config, std::move(ck.params)};
}

std::vector<CurvePoint> multi_seed(const std::vector<RunRecord>& runs) {
  if (runs.size() < 2) throw std::invalid_argument("multi_seed: need at least 2 runs");
  const auto& ref = runs.front().rows;
  for (const auto& r : runs) {
    if (r.rows.size() != ref.size()) throw std::invalid_argument("multi_seed: runs have different eval points");
    for (std::size_t i = 0; i < ref.size(); ++i) {
      if (r.rows[i].step != ref[i].step) throw std::invalid_argument("multi_seed: eval steps are misaligned");
    }
  }
  std::vector<CurvePoint> out;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    std::vector<double> rob, acc, loss;
    for (const auto& r : runs) {
      rob.push_back(r.rows[i].robustness);
      acc.push_back(r.rows[i].accuracy);
      loss.push_back(r.rows[i].loss.total);
    }
    out.push_back({ref[i].step, mean_and_se(rob), mean_and_se(acc), mean_and_se(loss)});
  }
  return out;
}

void write_metrics_csv(const std::filesystem::path& path, const RunRecord& record) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "step,variant,seed,loss_total,loss_heat,loss_offset,loss_det,R,A\n";
  for (const auto& r : record.rows) {
    out << r.step << "," << record.variant << "," << record.seed << "," << csv_number(r.loss.total) << ","
        << csv_number(r.loss.heat) << "," << csv_number(r.loss.offset) << "," << csv_number(r.loss.detector) << ","
        << csv_number(r.robustness) << "," << csv_number(r.accuracy) << "\n";
  }
}

RunRecord read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "step,variant,seed,loss_total,loss_heat,loss_offset,loss_det,R,A") {
    throw std::runtime_error(path.string() + ": not a metrics CSV");
  }
  RunRecord record;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 9) throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected 9 fields");
    try {
      MetricRow r;
      r.step = std::stoi(f[0]);
      record.variant = f[1];
      record.seed = std::stoull(f[2]);
      r.loss = {std::stod(f[4]), std::stod(f[5]), std::stod(f[6]), std::stod(f[3])};
      r.robustness = std::stod(f[7]);
      r.accuracy = std::stod(f[8]);
      if (!record.rows.empty() && r.step <= record.rows.back().step) {
        throw std::runtime_error("steps are not increasing");
      }
      record.rows.push_back(r);
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return record;
}

}  // namespace siamtrack
