#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <functional>

#include "siamtrack/perturb.hpp"
#include "test_support.hpp"

using namespace siamtrack;

namespace {

struct TinySetup {
  BackboneConfig bb = test::tiny_backbone();
  TrackerModel model{bb, init_parameters(bb)};
  CropGeometry geom;
  TinySetup() {
    geom.target_size = bb.target_size;
    geom.search_size = bb.search_size;
  }
  // Flat heat and huge corner offsets: every proposal is the clipped search
  // window, so IoU > 0 exactly when the window meets the target.
  void make_window_model() {
    for (auto& v : model.params.tracker_weight.values()) v = 0.0f;
    const float bias[6] = {0.0f, 1.0f, -100.0f, -100.0f, 100.0f, 100.0f};
    for (int k = 0; k < 6; ++k) model.params.tracker_bias.values()[k] = bias[k];
  }
};

std::vector<Sequence> tiny_dataset(int sequences, int frames, SceneKind kind = SceneKind::easy) {
  DatasetSpec spec;
  spec.seed = 17;
  spec.num_frames = frames;
  spec.width = 96;
  spec.height = 96;
  spec.splits = {{kind, sequences}};
  return generate_dataset(spec);
}

SweepGrid grid_from(const std::vector<double>& axis, const std::function<double(double, double)>& f) {
  SweepGrid g;
  g.kind = "test";
  g.axis_x = axis;
  g.axis_y = axis;
  for (double y : axis) {
    for (double x : axis) {
      g.mean.push_back(f(x, y));
      g.count.push_back(3);
    }
  }
  return g;
}

}  // namespace

TEST_SUITE("perturb") {
  TEST_CASE("sweep axis is symmetric with an exact zero") {
    SweepConfig cfg;
    const auto axis = cfg.axis();
    REQUIRE(axis.size() == 21);
    CHECK(axis[10] == 0.0);
    CHECK(axis.front() == doctest::Approx(-2.0));
    CHECK(axis.back() == doctest::Approx(2.0));
    for (std::size_t i = 0; i < axis.size(); ++i) CHECK(axis[i] == -axis[axis.size() - 1 - i]);
    cfg.extent = 0.0;
    CHECK(cfg.axis() == std::vector<double>{0.0});
    cfg.extent = 1.0;
    cfg.step = 0.3;
    CHECK_THROWS(cfg.validate());
    cfg = SweepConfig{};
    cfg.max_dt = 0;
    CHECK_THROWS(cfg.validate());
  }

  TEST_CASE("search sweep: unit center, zero outside the visible region") {
    TinySetup s;
    s.make_window_model();
    // One frame pair per sequence keeps cell means equal to per-pair values.
    const auto data = tiny_dataset(1, 2);
    SweepConfig cfg;
    cfg.extent = 3.0;
    cfg.step = 0.5;
    const SweepGrid g = search_sweep(s.model, data, cfg, s.geom, SelectConfig{});
    REQUIRE(g.total_pairs == 1);
    REQUIRE(g.dropped_pairs == 0);
    const int n = static_cast<int>(g.axis_x.size());
    CHECK(g.value(n / 2, n / 2) == 1.0);
    const Box prev = data[0].annotations[0].box;
    const Box next = data[0].annotations[1].box;
    const double sf = prev.size_factor();
    int outside = 0;
    for (int iy = 0; iy < n; ++iy) {
      for (int ix = 0; ix < n; ++ix) {
        const CropSpec spec = make_search_crop_spec(prev, s.geom.search_size, s.geom.search_ratio)
                                  .shifted(g.axis_x[ix] * sf, g.axis_y[iy] * sf);
        const double expected = iou(spec.window(), next);
        if (expected == 0.0) ++outside;
        CHECK((g.value(ix, iy) == 0.0) == (expected == 0.0));
      }
    }
    CHECK(outside > 0);
  }

  TEST_CASE("sweeps are deterministic and well formed on an untrained model") {
    TinySetup s;
    const auto data = tiny_dataset(2, 5);
    SweepConfig cfg;
    cfg.extent = 1.0;
    cfg.step = 0.5;
    cfg.max_dt = 3;
    for (auto fn : {&search_sweep, &target_sweep}) {
      const SweepGrid a = fn(s.model, data, cfg, s.geom, SelectConfig{});
      const SweepGrid b = fn(s.model, data, cfg, s.geom, SelectConfig{});
      CHECK(a.mean == b.mean);
      CHECK(a.count == b.count);
      CHECK(a.total_pairs == 8);
      for (double v : a.mean) {
        CHECK(std::isfinite(v));
        CHECK(v >= 0.0);
      }
    }
    const SweepCurve c = staleness_sweep(s.model, data, cfg, s.geom, SelectConfig{});
    CHECK(c.dt == std::vector<int>{1, 2, 3});
    CHECK(c.total_anchors == 4);
    if (c.count[0] > 0) CHECK(c.mean[0] == 1.0);
    cfg.max_dt = 10;
    CHECK_THROWS_AS(staleness_sweep(s.model, data, cfg, s.geom, SelectConfig{}), std::invalid_argument);
    CropGeometry wrong = s.geom;
    wrong.search_size = 64;
    CHECK_THROWS_AS(search_sweep(s.model, data, cfg, wrong, SelectConfig{}), std::invalid_argument);
  }

  TEST_CASE("a static scene has a flat staleness curve") {
    TinySetup s;
    s.make_window_model();
    auto data = tiny_dataset(6, 6);
    for (auto& seq : data) {
      for (int t = 1; t < seq.size(); ++t) {
        seq.frames[t] = seq.frames[0];
        seq.annotations[t].box = seq.annotations[0].box;
        seq.annotations[t].visible = true;
      }
    }
    SweepConfig cfg;
    cfg.max_dt = 5;
    const SweepCurve c = staleness_sweep(s.model, data, cfg, s.geom, SelectConfig{});
    REQUIRE(c.count[0] > 0);
    for (std::size_t k = 0; k < c.mean.size(); ++k) {
      CHECK(c.mean[k] == 1.0);
      CHECK(c.count[k] == c.count[0]);
    }
  }

  TEST_CASE("grid summary of simple profiles") {
    SweepConfig cfg;
    const auto axis = cfg.axis();
    const GridSummary flat = summarize_grid(grid_from(axis, [](double, double) { return 1.0; }));
    CHECK(flat.center == 1.0);
    CHECK(flat.plateau == doctest::Approx(1.0));
    CHECK(flat.dip == 0.0);

    // Radial bin 4 (radius 0.8) at 0.5, background 0.9.
    auto ring = [](double x, double y) {
      const long bin = std::lround(std::hypot(x, y) / 0.2);
      if (bin == 0) return 1.0;
      return bin == 4 ? 0.5 : 0.9;
    };
    const GridSummary g = summarize_grid(grid_from(axis, ring));
    CHECK(g.center == 1.0);
    CHECK(g.plateau == doctest::Approx(0.9));
    CHECK(g.dip == doctest::Approx(0.4));
    CHECK(g.dip_radius == doctest::Approx(0.8));

    // Mirroring the grid leaves the radial profile unchanged.
    auto lopsided = [](double x, double y) { return 1.0 / (1.0 + std::abs(x + 0.4) + 0.5 * std::abs(y)); };
    const GridSummary a = summarize_grid(grid_from(axis, lopsided));
    const GridSummary b = summarize_grid(grid_from(axis, [&](double x, double y) { return lopsided(-x, y); }));
    REQUIRE(a.radial.size() == b.radial.size());
    for (std::size_t i = 0; i < a.radial.size(); ++i) {
      CHECK(a.radial[i].first == b.radial[i].first);
      CHECK(a.radial[i].second == doctest::Approx(b.radial[i].second));
    }
    SweepGrid empty;
    CHECK_THROWS(summarize_grid(empty));
  }

  TEST_CASE("curve summary") {
    SweepCurve c;
    c.dt = {1, 2, 3, 4, 5, 6, 7, 8};
    c.mean = {1.0, 0.9, 0.8, 0.75, 0.7, 0.7, 0.6, 0.8};
    const CurveSummary s = summarize_curve(c);
    CHECK(s.first == 1.0);
    CHECK(s.last == 0.8);
    CHECK(s.asymptote == doctest::Approx(0.7));
    CHECK_THROWS(summarize_curve(SweepCurve{}));
  }

  TEST_CASE("grid csv round trip is exact") {
    SweepGrid g;
    g.kind = "search";
    g.axis_x = {-0.1, 0.0, 0.1};
    g.axis_y = g.axis_x;
    g.mean = {1.0 / 3.0, 0.1, 2.0 / 7.0, 1e-17, 1.0, 0.7071067811865476, 0.0, 3.0, 1.0 / 9.0};
    g.count = {1, 2, 3, 4, 5, 6, 7, 8, 9};
    const auto dir = test::temp_dir("perturb_csv");
    write_grid_csv(dir / "g.csv", g);
    const SweepGrid back = read_grid_csv(dir / "g.csv");
    CHECK(back.axis_x == g.axis_x);
    CHECK(back.axis_y == g.axis_y);
    CHECK(back.mean == g.mean);
    CHECK(back.count == g.count);
    write_grid_csv(dir / "h.csv", back);
    CHECK(test::read_bytes(dir / "g.csv") == test::read_bytes(dir / "h.csv"));
  }

  TEST_CASE("reports write csv, plots and summaries") {
    const auto dir = test::temp_dir("perturb_report");
    SweepConfig cfg;
    write_grid_report(dir, "search", grid_from(cfg.axis(), [](double x, double) { return 1.0 - 0.1 * std::abs(x); }));
    for (const char* f : {"search.csv", "search.png", "search_radial.png", "search_summary.json"}) {
      CHECK(std::filesystem::exists(dir / f));
    }
    SweepCurve c;
    c.dt = {1, 2, 3};
    c.mean = {1.0, 0.8, 0.7};
    c.count = {4, 4, 4};
    write_curve_report(dir, "staleness", c);
    for (const char* f : {"staleness.csv", "staleness.png", "staleness_summary.json"}) {
      CHECK(std::filesystem::exists(dir / f));
    }
  }
}
