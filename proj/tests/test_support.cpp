#include "test_support.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <cstdio>
#include <cstdlib>
#include <random>

#include "siamtrack/train.hpp"

#ifndef SIAMTRACK_TEST_SCRATCH
#define SIAMTRACK_TEST_SCRATCH "test_scratch"
#endif

namespace test {

using namespace siamtrack;

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::path(SIAMTRACK_TEST_SCRATCH) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::vector<char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

BackboneConfig tiny_backbone() {
  BackboneConfig cfg;
  cfg.stage_channels = {2, 3, 3, 2};
  cfg.feature_channels = 3;
  cfg.projection_channels = 2;
  cfg.target_size = 16;
  cfg.search_size = 32;
  cfg.init_seed = 5;
  return cfg;
}

TrainingExample tiny_example(std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  auto random_image = [&](int n) {
    Image img(n, n, 3);
    for (auto& v : img.data) v = u(rng);
    return img;
  };
  TrainingExample ex;
  ex.target_crop = random_image(16);
  ex.search_crop = random_image(32);
  ex.detector_frame = random_image(32);
  ex.search_box = Box{40, 44, 52, 58};
  ex.search_spec = make_search_crop_spec(Box{41, 43, 53, 57}, 32, 2.0);
  ex.search_heat = disc_target(frame_to_grid(ex.search_box.center(), ex.search_spec, 4), 8, 1.5);
  ex.search_offsets = encode_offsets(ex.search_box, ex.search_spec, 4, 8, 1.5);
  ex.detector_heat = disc_target(Point{2.0, 5.0}, 8, 1.5);
  return ex;
}

GradCheck gradient_check(bool with_detector, int samples, std::uint64_t seed) {
  const BackboneConfig cfg = tiny_backbone();
  Parameters<double> params = init_parameters(cfg).cast<double>();
  // Larger head weights so every term contributes visibly.
  Rng rng(seed);
  std::normal_distribution<double> n01(0.0, 0.5);
  for (auto* t : {&params.tracker_weight, &params.detector_weight, &params.tracker_bias, &params.detector_bias}) {
    for (auto& v : t->values()) v = n01(rng);
  }
  // Zero biases put units with dead inputs exactly on the ReLU kink, where
  // central differences are meaningless.
  std::normal_distribution<double> small(0.0, 0.1);
  for (auto& b : params.conv_bias) {
    for (auto& v : b.values()) v = small(rng);
  }
  for (auto& v : params.projection_bias.values()) v = small(rng);
  const TrainingExample ex = tiny_example(seed + 1);
  LossWeights w;
  Parameters<double> grads = Parameters<double>::zeros(cfg);
  example_loss(params, cfg, ex, w, with_detector, &grads);

  std::vector<std::pair<Tensor<double>*, Tensor<double>*>> pairs;
  std::vector<std::string> names;
  params.for_each([&](const std::string& n, Tensor<double>& t) {
    names.push_back(n);
    pairs.push_back({&t, nullptr});
  });
  std::size_t k = 0;
  grads.for_each([&](const std::string&, Tensor<double>& t) { pairs[k++].second = &t; });

  GradCheck result;
  const double eps = 1e-6;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto& [p, g] = pairs[i];
    const bool detector = names[i].rfind("detector_head.", 0) == 0;
    if (detector && !with_detector) {
      for (double v : g->values()) result.detector_grads_zero &= v == 0.0;
      continue;
    }
    std::uniform_int_distribution<std::size_t> pick(0, p->size() - 1);
    for (int s = 0; s < samples; ++s) {
      const std::size_t j = pick(rng);
      const double orig = (*p)[j];
      (*p)[j] = orig + eps;
      const double up = example_loss<double>(params, cfg, ex, w, with_detector, nullptr).total;
      (*p)[j] = orig - eps;
      const double down = example_loss<double>(params, cfg, ex, w, with_detector, nullptr).total;
      (*p)[j] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = (*g)[j];
      const double scale = std::max(std::abs(numeric), std::abs(analytic));
      if (scale < 1e-7) continue;
      if (std::getenv("GRADCHECK_VERBOSE") && std::abs(numeric - analytic) / scale > 1e-4) {
        std::fprintf(stderr, "%s[%zu] analytic %.9g numeric %.9g\n", names[i].c_str(), j, analytic, numeric);
      }
      result.max_rel_error = std::max(result.max_rel_error, std::abs(numeric - analytic) / scale);
      ++result.checked;
    }
  }
  return result;
}

}  // namespace test
