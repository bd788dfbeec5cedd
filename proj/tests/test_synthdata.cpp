#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>

#include "siamtrack/geometry.hpp"
#include "siamtrack/synthdata.hpp"
#include "test_support.hpp"

using namespace siamtrack;

namespace {

DatasetSpec small_spec(std::uint64_t seed) {
  DatasetSpec spec;
  spec.seed = seed;
  spec.num_frames = 12;
  spec.width = 96;
  spec.height = 80;
  spec.splits = {{SceneKind::easy, 2}, {SceneKind::hard, 1}, {SceneKind::drift, 1}};
  return spec;
}

// Static rectangle target in the middle of a 100x100 frame plus one occluder.
SceneScript occluded_scene(double occluder_x_min, double occluder_x_max) {
  SceneScript s;
  s.num_frames = 3;
  s.width = 100;
  s.height = 100;
  ObjectSpec t;
  t.shape = ShapeClass::rectangle;
  t.center = {50.0, 50.0};
  t.width = 20.0;
  t.height = 20.0;
  t.is_target = true;
  s.objects.push_back(t);
  ObjectSpec bar;
  bar.shape = ShapeClass::rectangle;
  bar.center = {0.5 * (occluder_x_min + occluder_x_max), 50.0};
  bar.width = occluder_x_max - occluder_x_min;
  bar.height = 60.0;
  s.occluders.push_back(bar);
  return s;
}

double chi_square(const std::map<int, int>& counts, const std::map<int, double>& expected_prob, int n) {
  double chi = 0.0;
  for (const auto& [k, p] : expected_prob) {
    const double e = p * n;
    const double o = counts.count(k) ? counts.at(k) : 0;
    chi += (o - e) * (o - e) / e;
  }
  return chi;
}

}  // namespace

TEST_SUITE("synthdata") {
  TEST_CASE("mix_seed is a stable bijective-looking mixer") {
    CHECK(mix_seed(0, 0) != mix_seed(0, 1));
    CHECK(mix_seed(1, 0) != mix_seed(0, 1));
    CHECK(mix_seed(5, 9) == mix_seed(5, 9));
  }

  TEST_CASE("dataset generation is deterministic in the seed") {
    const auto a = generate_dataset(small_spec(3));
    const auto b = generate_dataset(small_spec(3));
    const auto c = generate_dataset(small_spec(4));
    REQUIRE(a.size() == 4);
    REQUIRE(c.size() == 4);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].id == b[i].id);
      CHECK(a[i].frames == b[i].frames);
      CHECK(a[i].annotations == b[i].annotations);
      CHECK(a[i].frames[0] != c[i].frames[0]);
    }
    CHECK(a[0].id == "easy_0000");
    CHECK(a[2].id == "hard_0000");
    CHECK(a[3].split == "drift");
    for (const auto& seq : a) {
      CHECK(seq.size() == 12);
      CHECK(seq.frames[0].width == 96);
      CHECK(seq.frames[0].height == 80);
      CHECK(seq.annotations[0].visible);
    }
  }

  TEST_CASE("written datasets read back exactly") {
    const auto seqs = generate_dataset(small_spec(5));
    const auto dir = test::temp_dir("synth_roundtrip");
    write_dataset(dir, seqs);
    const auto back = read_dataset(dir);
    REQUIRE(back.size() == seqs.size());
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      CHECK(back[i].id == seqs[i].id);
      CHECK(back[i].split == seqs[i].split);
      CHECK(back[i].frames == seqs[i].frames);
      CHECK(back[i].annotations == seqs[i].annotations);
    }
    const auto dir2 = test::temp_dir("synth_roundtrip2");
    write_dataset(dir2, back);
    CHECK(test::read_bytes(dir / "manifest.json") == test::read_bytes(dir2 / "manifest.json"));
    CHECK(test::read_bytes(dir / seqs[0].id / "annotations.jsonl") ==
          test::read_bytes(dir2 / seqs[0].id / "annotations.jsonl"));
  }

  TEST_CASE("an empty dataset directory reads as no sequences") {
    const auto dir = test::temp_dir("synth_empty");
    CHECK(read_dataset(dir).empty());
    CHECK_THROWS(read_dataset(dir / "missing"));
  }

  TEST_CASE("annotation parse errors name file and line") {
    const auto dir = test::temp_dir("synth_badann");
    const auto path = dir / "annotations.jsonl";
    {
      std::ofstream out(path);
      out << R"({"frame":0,"x_min":1,"y_min":2,"x_max":5,"y_max":6,"visible":true})" << "\n";
      out << R"({"frame":1,"x_min":1,"y_min":2,"x_max":5})" << "\n";
    }
    try {
      read_annotations(path);
      FAIL("expected a parse error");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("annotations.jsonl:2") != std::string::npos);
    }
    {
      std::ofstream out(path);
      out << R"({"frame":0,"x_min":9,"y_min":2,"x_max":5,"y_max":6,"visible":true})" << "\n";
    }
    CHECK_THROWS_AS(read_annotations(path), std::runtime_error);
  }

  TEST_CASE("visibility follows the unoccluded fraction") {
    // Occluder covers half of the target: visible.
    auto half = render_sequence(occluded_scene(30.0, 50.0));
    CHECK(half.annotations[0].visible);
    CHECK(half.annotations[0].box.x_min == doctest::Approx(40.0));
    CHECK(half.annotations[0].box.x_max == doctest::Approx(60.0));
    // 90% covered: invisible, box still reported.
    auto mostly = render_sequence(occluded_scene(30.0, 58.0));
    CHECK_FALSE(mostly.annotations[0].visible);
    CHECK(mostly.annotations[0].box.area() == doctest::Approx(400.0));
    auto none = render_sequence(occluded_scene(0.0, 10.0));
    CHECK(none.annotations[2].visible);
  }

  TEST_CASE("scene scripts validate their target") {
    SceneScript s = occluded_scene(0.0, 1.0);
    s.objects[0].is_target = false;
    CHECK_THROWS_AS(render_sequence(s), std::invalid_argument);
    s = occluded_scene(0.0, 1.0);
    s.objects[0].center = {-40.0, 50.0};
    CHECK_THROWS_AS(render_sequence(s), std::invalid_argument);
    CHECK_THROWS(scene_kind_from_string("medium"));
    CHECK(scene_kind_from_string(to_string(SceneKind::hard)) == SceneKind::hard);
  }

  TEST_CASE("hard scenes carry same-shape distractors that cross the target") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const SceneScript s = make_scene_script(seed, SceneKind::hard, 50, 160, 160);
      REQUIRE(s.objects.size() == 3);
      CHECK(s.occluders.size() == 1);
      const auto& target = s.objects[1];
      REQUIRE(target.is_target);
      for (int d : {0, 2}) {
        const auto& o = s.objects[d];
        CHECK_FALSE(o.is_target);
        CHECK(o.shape == target.shape);
        CHECK(o.similarity_class == 1);
        CHECK(o.texture.base != target.texture.base);
        // Render the distractor as the target to recover its path.
        SceneScript probe = s;
        probe.occluders.clear();
        for (auto& obj : probe.objects) obj.is_target = false;
        probe.objects[d].is_target = true;
        probe.num_frames = 50;
        const auto d_ann = render_sequence(probe).annotations;
        SceneScript tprobe = s;
        tprobe.occluders.clear();
        const auto t_ann = render_sequence(tprobe).annotations;
        double closest = 1e9;
        for (int t = 0; t < 50; ++t) {
          const Point a = d_ann[t].box.center(), b = t_ann[t].box.center();
          closest = std::min(closest, std::hypot(a.x - b.x, a.y - b.y));
        }
        CHECK(closest < std::max(target.width, target.height));
      }
    }
  }

  TEST_CASE("drift scenes change the target appearance, easy scenes do not") {
    const SceneScript drift = make_scene_script(2, SceneKind::drift, 50, 160, 160);
    const SceneScript easy = make_scene_script(2, SceneKind::easy, 50, 160, 160);
    REQUIRE(drift.objects.size() == 1);
    REQUIRE(easy.objects.size() == 1);
    CHECK(drift.objects[0].phase_drift > 0.0);
    CHECK(drift.objects[0].hue_drift > 0.0);
    CHECK(easy.objects[0].phase_drift == 0.0);
    CHECK(easy.objects[0].hue_drift == 0.0);
  }

  TEST_CASE("target index is uniform over the causal range") {
    Rng rng(1);
    const int start = 7, n = 70000;
    std::map<int, int> counts;
    for (int i = 0; i < n; ++i) ++counts[sample_target_index(start, TargetRule::random_causal, rng)];
    std::map<int, double> expected;
    for (int k = 0; k < start; ++k) expected[k] = 1.0 / start;
    CHECK(counts.size() == static_cast<std::size_t>(start));
    CHECK(chi_square(counts, expected, n) < 22.46);  // df 6, p = 0.001
    CHECK(sample_target_index(start, TargetRule::first_frame, rng) == 0);
    CHECK_THROWS(sample_target_index(0, TargetRule::random_causal, rng));
  }

  TEST_CASE("search index follows the sub-sequence mixture") {
    Sequence seq;
    seq.id = "s";
    const int frames = 10;
    seq.frames.resize(frames);
    seq.annotations.resize(frames);
    for (int tau : {1, 2, 3}) {
      SamplerConfig cfg;
      cfg.subsequence_length = tau;
      Rng rng(100 + tau);
      const int n = 60000;
      std::map<int, int> counts;
      for (int i = 0; i < n; ++i) {
        const FramePair p = sample_pair(seq, cfg, rng);
        REQUIRE(p.target < p.search);
        REQUIRE(p.target >= 0);
        REQUIRE(p.search < frames);
        ++counts[p.search];
      }
      // start ~ U[1, T - tau], search ~ U[start, start + tau - 1]
      std::map<int, double> expected;
      const int starts = frames - tau;
      for (int s = 1; s <= starts; ++s) {
        for (int j = 0; j < tau; ++j) expected[s + j] += 1.0 / (starts * tau);
      }
      CHECK(counts.size() == expected.size());
      CHECK(chi_square(counts, expected, n) < 27.88);  // df <= 9, p = 0.001
    }
    SamplerConfig cfg;
    cfg.subsequence_length = 10;
    Rng rng(0);
    CHECK_THROWS_AS(sample_pair(seq, cfg, rng), std::invalid_argument);
  }

  TEST_CASE("training example targets sit on the object") {
    const auto seqs = generate_dataset(small_spec(9));
    const Sequence& seq = seqs[0];
    SamplerConfig cfg;
    cfg.augment = AugmentConfig{0, 0, 0, 0, 0, 0, 0};
    CropGeometry geom;
    Rng rng(3);
    const TrainingExample ex = build_training_example(seq, {2, 5}, cfg, geom, rng);
    CHECK(ex.search_box == seq.annotations[5].box);
    // Without augmentation the search crop is centred on the previous box.
    CHECK(ex.search_spec.center.x == doctest::Approx(seq.annotations[4].box.center().x));
    CHECK(ex.search_spec.center.y == doctest::Approx(seq.annotations[4].box.center().y));
    CHECK(ex.target_spec.center.x == doctest::Approx(seq.annotations[2].box.center().x));
    CHECK(ex.search_crop == crop_and_resize(seq.frames[5], ex.search_spec));
    CHECK(ex.detector_frame == crop_and_resize(seq.frames[5], full_frame_spec(96, 80, geom.search_size)));

    const int g = geom.grid();
    const Point c = frame_to_grid(ex.search_box.center(), ex.search_spec, geom.stride);
    int positives = 0;
    for (int y = 0; y < g; ++y) {
      for (int x = 0; x < g; ++x) {
        const double dx = x - c.x, dy = y - c.y;
        const bool inside = dx * dx + dy * dy <= geom.disc_radius * geom.disc_radius;
        const std::size_t i = static_cast<std::size_t>(y) * g + x;
        CHECK((ex.search_heat[i] > 0.5f) == inside);
        CHECK((ex.search_offsets.mask[i] > 0.5f) == inside);
        positives += inside;
      }
    }
    CHECK(positives > 0);
    CHECK_THROWS_AS(build_training_example(seq, {5, 5}, cfg, geom, rng), std::invalid_argument);
  }

  TEST_CASE("full frame spec is a centred square") {
    const CropSpec s = full_frame_spec(96, 80, 128);
    CHECK(s.center.x == 48.0);
    CHECK(s.center.y == 40.0);
    CHECK(s.side == 96.0);
    CHECK(s.out_size == 128);
  }

  TEST_CASE("photometric augmentation with zero ranges is the identity") {
    Image img(4, 4, 3, 0.3f);
    img.at(1, 2, 0) = 0.9f;
    Image copy = img;
    Rng rng(0);
    photometric_augment(copy, AugmentConfig{0, 0, 0, 0, 0, 0, 0}, rng);
    CHECK(copy == img);
    photometric_augment(copy, AugmentConfig{}, rng);
    CHECK(copy != img);
  }
}
