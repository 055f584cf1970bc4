#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "nkc/analysis.hpp"
#include "nkc/kingman.hpp"
#include "nkc/nested.hpp"
#include "nkc/lambert.hpp"
#include "nkc/rde.hpp"
#include "nkc/rng.hpp"

namespace py = pybind11;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Nested Kingman coalescent toolkit";
  m.attr("__version__") = NKC_VERSION;

  py::register_exception<nkc::NonConvergenceError>(m, "NonConvergenceError");
  py::register_exception<nkc::InsufficientSeparationError>(
      m, "InsufficientSeparationError");

  py::class_<nkc::RngStream>(m, "RngStream")
      .def(py::init<std::uint64_t, std::uint64_t>(), py::arg("seed"),
           py::arg("stream_index") = 0)
      .def("next_u64", &nkc::RngStream::next_u64)
      .def("uniform_open01", &nkc::RngStream::uniform_open01)
      .def("exponential", &nkc::RngStream::exponential, py::arg("rate"));

  // single-level coalescent
  m.def("pair_merge_rate", &nkc::pair_merge_rate, py::arg("k"), py::arg("rate_scale"));
  m.def("expected_blocks", &nkc::expected_blocks, py::arg("n"), py::arg("t"));
  m.def("sample_block_count", &nkc::sample_block_count, py::arg("n"), py::arg("t"),
        py::arg("rng"));

  py::class_<nkc::BlockEvent>(m, "BlockEvent")
      .def_readonly("time", &nkc::BlockEvent::time)
      .def_readonly("count", &nkc::BlockEvent::count);
  py::class_<nkc::BlockTrajectory>(m, "BlockTrajectory")
      .def_readonly("start", &nkc::BlockTrajectory::start)
      .def_readonly("rate_scale", &nkc::BlockTrajectory::rate_scale)
      .def_readonly("events", &nkc::BlockTrajectory::events);
  py::class_<nkc::HittingTimes>(m, "HittingTimes")
      .def_readonly("start", &nkc::HittingTimes::start)
      .def_readonly("lowest", &nkc::HittingTimes::lowest)
      .def("at", &nkc::HittingTimes::at, py::arg("m"));
  py::class_<nkc::BlockRun>(m, "BlockRun")
      .def_readonly("trajectory", &nkc::BlockRun::trajectory)
      .def_readonly("hitting_times", &nkc::BlockRun::hitting_times);
  m.def("simulate_block_trajectory", &nkc::simulate_block_trajectory, py::arg("n"),
        py::arg("rng"), py::arg("rate_scale") = 1.0, py::arg("stop_level") = 1);

  py::class_<nkc::YuleCheckReport>(m, "YuleCheckReport")
      .def_readonly("level_min", &nkc::YuleCheckReport::level_min)
      .def_readonly("level_max", &nkc::YuleCheckReport::level_max)
      .def_readonly("normalized_durations", &nkc::YuleCheckReport::normalized_durations)
      .def_readonly("mean", &nkc::YuleCheckReport::mean)
      .def_readonly("ks_distance", &nkc::YuleCheckReport::ks_distance);
  m.def("yule_timechange_statistic", &nkc::yule_timechange_statistic, py::arg("traj"),
        py::arg("m"), py::arg("c"));

  // nested coalescent
  py::class_<nkc::TrajectoryPoint>(m, "TrajectoryPoint")
      .def_readonly("t", &nkc::TrajectoryPoint::t)
      .def_readonly("species", &nkc::TrajectoryPoint::species)
      .def_readonly("lineages", &nkc::TrajectoryPoint::lineages);
  py::class_<nkc::Trajectory>(m, "Trajectory")
      .def_readonly("points", &nkc::Trajectory::points)
      .def_readonly("lineage_merges", &nkc::Trajectory::lineage_merges)
      .def_readonly("species_merges", &nkc::Trajectory::species_merges)
      .def_property_readonly("terminal",
                             [](const nkc::Trajectory& t) { return t.terminal(); })
      .def("at_time", &nkc::Trajectory::at_time, py::arg("t"))
      .def("sample_counts_at",
           [](const nkc::Trajectory& traj, const std::vector<double>& times) {
             return traj.sample_counts_at(times);
           },
           py::arg("times"))
      .def("write_csv", &nkc::Trajectory::write_csv_file, py::arg("path"));

  m.def(
      "simulate_nested",
      [](std::int64_t species, std::int64_t lineages, double rate_c,
         std::uint64_t seed, std::uint64_t stream, std::optional<double> t_max,
         const std::string& decimate) {
        nkc::NestedConfig cfg;
        cfg.species = species;
        cfg.lineages = lineages;
        cfg.rate_c = rate_c;
        cfg.seed = seed;
        cfg.stream = stream;
        cfg.stop = t_max ? nkc::StopRule::at_time(*t_max)
                         : nkc::StopRule::to_absorption();
        cfg.decimation = nkc::DecimationPolicy::parse(decimate);
        return nkc::simulate_nested(cfg);
      },
      py::arg("species"), py::arg("lineages"), py::arg("rate_c"),
      py::arg("seed") = 1, py::arg("stream") = 0, py::arg("t_max") = std::nullopt,
      py::arg("decimate") = "geometric:1.02",
      "Exact nested Kingman coalescent run (t_max=None runs to absorption)");

  // RDE solver
  m.def("h_merge", &nkc::h_merge, py::arg("u"), py::arg("x"));
  m.def("conditional_mean_w", &nkc::conditional_mean_w, py::arg("w1"), py::arg("w2"));
  m.def("lambert_w_m1", &nkc::lambert_w_m1, py::arg("y"));
  m.def("wasserstein1", [](const std::vector<double>& a, const std::vector<double>& b) {
    return nkc::wasserstein1(nkc::EmpiricalDistribution(a),
                             nkc::EmpiricalDistribution(b));
  });
  m.def(
      "apply_t",
      [](const std::vector<double>& particles, std::size_t out_count,
         nkc::RngStream& rng) {
        return nkc::apply_T(nkc::EmpiricalDistribution(particles), out_count, rng)
            .particles();
      },
      py::arg("particles"), py::arg("out_count"), py::arg("rng"));

  py::class_<nkc::GammaBounds>(m, "GammaBounds")
      .def_readonly("lower", &nkc::GammaBounds::lower)
      .def_readonly("upper", &nkc::GammaBounds::upper)
      .def_readonly("residual", &nkc::GammaBounds::residual);
  m.def("gamma_analytic_bounds", &nkc::gamma_analytic_bounds);

  py::class_<nkc::SandwichPair>(m, "SandwichPair")
      .def_readonly("lower", &nkc::SandwichPair::lower)
      .def_readonly("upper", &nkc::SandwichPair::upper);
  m.def("sandwich_replicate", &nkc::sandwich_replicate, py::arg("depth"), py::arg("rng"));

  py::class_<nkc::GammaEstimate>(m, "GammaEstimate")
      .def_readonly("mean_lower", &nkc::GammaEstimate::mean_lower)
      .def_readonly("mean_upper", &nkc::GammaEstimate::mean_upper)
      .def_readonly("std_error", &nkc::GammaEstimate::std_error)
      .def_readonly("ci95_lo", &nkc::GammaEstimate::ci95_lo)
      .def_readonly("ci95_hi", &nkc::GammaEstimate::ci95_hi)
      .def_readonly("depth", &nkc::GammaEstimate::depth)
      .def_readonly("replicates", &nkc::GammaEstimate::replicates)
      .def_readonly("seed", &nkc::GammaEstimate::seed)
      .def_readonly("order_violations", &nkc::GammaEstimate::order_violations)
      .def_readonly("max_gap", &nkc::GammaEstimate::max_gap);
  m.def("estimate_gamma", &nkc::estimate_gamma, py::arg("depth"), py::arg("replicates"),
        py::arg("seed"), py::arg("workers") = 1);

  py::class_<nkc::FixedPointResult>(m, "FixedPointResult")
      .def_property_readonly(
          "particles",
          [](const nkc::FixedPointResult& r) { return r.final_state.particles(); })
      .def_readonly("gamma_hat", &nkc::FixedPointResult::gamma_hat)
      .def_readonly("distance_sequence", &nkc::FixedPointResult::distance_sequence)
      .def_readonly("iterations", &nkc::FixedPointResult::iterations)
      .def_readonly("converged", &nkc::FixedPointResult::converged)
      .def_readonly("plateaued", &nkc::FixedPointResult::plateaued)
      .def_readonly("plateau_level", &nkc::FixedPointResult::plateau_level);
  m.def(
      "iterate_to_fixed_point",
      [](std::size_t particle_count, double tol, int max_iter, const std::string& init,
         std::uint64_t seed, std::uint64_t stream) {
        nkc::FixedPointInit tag;
        if (init == "delta2") {
          tag = nkc::FixedPointInit::Delta2;
        } else if (init == "deltaInf") {
          tag = nkc::FixedPointInit::DeltaInf;
        } else {
          throw std::invalid_argument("init: expected delta2 or deltaInf");
        }
        nkc::RngStream rng(seed, stream);
        return nkc::iterate_to_fixed_point(particle_count, tol, max_iter, tag, rng);
      },
      py::arg("particle_count"), py::arg("tol") = 1e-3, py::arg("max_iter") = 60,
      py::arg("init") = "delta2", py::arg("seed") = 1, py::arg("stream") = 0);

  // scaling analysis
  py::class_<nkc::Window>(m, "Window")
      .def(py::init<double, double>(), py::arg("t_lo"), py::arg("t_hi"))
      .def_readonly("t_lo", &nkc::Window::t_lo)
      .def_readonly("t_hi", &nkc::Window::t_hi);
  py::class_<nkc::ScalingReport>(m, "ScalingReport")
      .def_readonly("window", &nkc::ScalingReport::window)
      .def_readonly("grid_points", &nkc::ScalingReport::grid_points)
      .def_readonly("slope", &nkc::ScalingReport::slope)
      .def_readonly("intercept", &nkc::ScalingReport::intercept)
      .def_readonly("r_squared", &nkc::ScalingReport::r_squared)
      .def_readonly("target_slope", &nkc::ScalingReport::target_slope)
      .def_readonly("degenerate", &nkc::ScalingReport::degenerate)
      .def_readonly("deviation_series", &nkc::ScalingReport::deviation_series)
      .def_readonly("max_abs_deviation", &nkc::ScalingReport::max_abs_deviation)
      .def_readonly("level", &nkc::ScalingReport::level);
  m.def("loglog_slope", &nkc::loglog_slope, py::arg("traj"), py::arg("t_lo"),
        py::arg("t_hi"), py::arg("grid_points") = 40);
  m.def(
      "check_theorem1",
      [](const nkc::Trajectory& traj, double c, double gamma, double t_lo, double t_hi,
         int grid_points) {
        return nkc::check_theorem1(traj, c, gamma, {t_lo, t_hi}, grid_points);
      },
      py::arg("traj"), py::arg("c"), py::arg("gamma"), py::arg("t_lo"), py::arg("t_hi"),
      py::arg("grid_points") = 40);
  m.def(
      "check_prop2",
      [](const nkc::Trajectory& traj, std::int64_t s, double t_lo, double t_hi,
         int grid_points) {
        return nkc::check_prop2(traj, s, {t_lo, t_hi}, grid_points);
      },
      py::arg("traj"), py::arg("s"), py::arg("t_lo"), py::arg("t_hi"),
      py::arg("grid_points") = 40);
  m.def("heuristic_species_curve", &nkc::heuristic_species_curve, py::arg("s"),
        py::arg("c"), py::arg("t"));
  m.def(
      "two_phase_detect",
      [](const nkc::Trajectory& traj, std::int64_t species, std::int64_t lineages,
         double rate_c, int grid_points) {
        nkc::NestedConfig cfg;
        cfg.species = species;
        cfg.lineages = lineages;
        cfg.rate_c = rate_c;
        return nkc::two_phase_detect(traj, cfg, grid_points);
      },
      py::arg("traj"), py::arg("species"), py::arg("lineages"), py::arg("rate_c"),
      py::arg("grid_points") = 40);
}
