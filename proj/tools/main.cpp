// dirreg command-line driver: register / normals / generate / experiment /
// evaluate / interpolate. Exit codes: 0 success, 2 validation error, 3 runtime
// error.

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>

#include "dirreg/correspond.hpp"
#include "dirreg/harness.hpp"
#include "dirreg/io.hpp"
#include "dirreg/normals.hpp"
#include "dirreg/optimize.hpp"

using namespace dirreg;
using nlohmann::json;

namespace {

constexpr double kPi = 3.14159265358979323846;

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

OrientedPointSet load_shape(const std::string& path, int dim, bool closed, bool open) {
  if (ends_with(path, ".ply")) return read_ply(path);
  auto conn = OrientedPointSet::Connectivity::none;
  if (closed) conn = OrientedPointSet::Connectivity::closed_polyline;
  else if (open) conn = OrientedPointSet::Connectivity::open_polyline;
  return read_points_csv(path, dim, conn);
}

void save_shape(const std::string& path, const OrientedPointSet& shape) {
  if (ends_with(path, ".ply")) write_ply(path, shape);
  else write_points_csv(path, shape);
}

// Fill in missing normals from whatever structure the shape carries.
void ensure_normals(OrientedPointSet& shape, int k) {
  if (shape.has_normals()) return;
  if (shape.dim() == 2) {
    if (shape.connectivity != OrientedPointSet::Connectivity::open_polyline &&
        shape.connectivity != OrientedPointSet::Connectivity::closed_polyline)
      throw MissingNormals(
          "2D input has no normals; pass --closed/--open so they can be estimated");
    shape.normals = normals_spline2d(
        shape.points, shape.connectivity == OrientedPointSet::Connectivity::closed_polyline);
  } else if (!shape.faces.empty()) {
    shape.normals = normals_mesh(shape.points, shape.faces);
  } else {
    shape.normals = normals_knn_pca(shape.points, k);
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  json j;
  in >> j;
  return j;
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
}

struct RegisterArgs {
  std::string model, target, cost = "xu", transform = "rot2", config;
  std::string out_transform, out_points, dump_correspondences;
  std::uint64_t seed = 0;
  int dim = 0;
  bool closed = false, open = false;
};

int run_register(const RegisterArgs& a) {
  const TransformFamily family = a.transform == "rot2"   ? TransformFamily::rotation2d
                                 : a.transform == "rot3" ? TransformFamily::rotation3d
                                                         : TransformFamily::tps;
  int dim = a.dim;
  if (dim == 0) dim = family == TransformFamily::rotation3d ? 3 : 2;

  CostSpec spec;
  spec.family = cost_family_from_string(a.cost);
  spec.mode = family == TransformFamily::tps ? CostMode::full
                                             : CostMode::rigid_scalar_product;

  RegisterOptions opts;
  opts.seed = a.seed;
  std::optional<AnnealingSchedule> sched;
  if (!a.config.empty()) {
    const json cfg = read_json_file(a.config);
    if (cfg.contains("subsample_m")) opts.subsample_m = cfg["subsample_m"];
    if (cfg.contains("use_correspondences")) opts.use_correspondences = cfg["use_correspondences"];
    if (cfg.contains("corr_k")) opts.corr_k = cfg["corr_k"];
    if (cfg.contains("freeze_correspondences")) opts.freeze_correspondences = cfg["freeze_correspondences"];
    if (cfg.contains("max_evals_per_step")) opts.max_evals_per_step = cfg["max_evals_per_step"];
    if (cfg.contains("multi_start")) opts.multi_start = cfg["multi_start"];
    if (cfg.contains("grid")) opts.grid_shape = cfg["grid"].get<std::vector<int>>();
    if (cfg.contains("normal_mode"))
      opts.tps_normal_mode = cfg["normal_mode"] == "recompute" ? NormalMode::recompute
                                                               : NormalMode::jacobian;
    if (cfg.contains("mode"))
      spec.mode = cfg["mode"] == "full" ? CostMode::full : CostMode::rigid_scalar_product;
    if (cfg.contains("schedule")) {
      const json& s = cfg["schedule"];
      sched = AnnealingSchedule::geometric(s.at("h_init"), s.at("h_final"),
                                           s.at("kappa_init"), s.at("kappa_final"),
                                           s.at("steps"));
    }
  }

  OrientedPointSet model = load_shape(a.model, dim, a.closed, a.open);
  OrientedPointSet target = load_shape(a.target, dim, a.closed, a.open);
  if (family_needs_normals(spec.family)) {
    ensure_normals(model, 40);
    ensure_normals(target, 40);
  }

  if (!sched) sched = default_schedule(family, model);
  const OptimizeReport report =
      register_shapes(model, target, spec, family, *sched, opts);

  json out;
  out["transform"] = transform_to_json(report.transform);
  out["seconds"] = report.seconds;
  json stages = json::array();
  for (const auto& st : report.stages)
    stages.push_back({{"h", st.h},
                      {"kappa", st.kappa},
                      {"alpha", st.alpha},
                      {"entry_cost", st.entry_cost},
                      {"exit_cost", st.exit_cost},
                      {"iterations", st.iterations},
                      {"evals", st.evals}});
  out["stages"] = stages;

  if (!a.out_transform.empty()) write_json_file(a.out_transform, out);
  else std::cout << out.dump(2) << '\n';

  if (!a.out_points.empty()) {
    OrientedPointSet moved = apply_transform(report.transform, model, opts.tps_normal_mode);
    save_shape(a.out_points, moved);
  }
  if (!a.dump_correspondences.empty()) {
    const Eigen::MatrixXd moved = apply_to_points(report.transform, model.points);
    const CorrespondenceSet corr =
        estimate_correspondences(moved, target.points, 0.0, opts.corr_k);
    std::ofstream out_csv(a.dump_correspondences);
    out_csv << "i,j\n";
    for (const auto& [i, j] : corr.pairs) out_csv << i << ',' << j << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* threads = std::getenv("DIRREG_THREADS"))
    Eigen::setNbThreads(std::max(1, std::atoi(threads)));

  CLI::App app{"L2 registration of oriented point sets"};
  app.require_subcommand(1);

  // register
  RegisterArgs reg;
  auto* cmd_reg = app.add_subcommand("register", "align a model shape to a target");
  cmd_reg->add_option("model", reg.model, "model shape (.csv or .ply)")->required();
  cmd_reg->add_option("target", reg.target, "target shape (.csv or .ply)")->required();
  cmd_reg->add_option("--cost", reg.cost, "cost family")
      ->check(CLI::IsMember({"x", "x-delta", "u", "u-delta", "xu", "xu-delta"}));
  cmd_reg->add_option("--transform", reg.transform, "transform family")
      ->check(CLI::IsMember({"rot2", "rot3", "tps"}));
  cmd_reg->add_option("--config", reg.config, "JSON options file");
  cmd_reg->add_option("--out-transform", reg.out_transform, "write transform JSON here");
  cmd_reg->add_option("--out-points", reg.out_points, "write transformed model here");
  cmd_reg->add_option("--dump-correspondences", reg.dump_correspondences,
                      "write final (i,j) pairs CSV here");
  cmd_reg->add_option("--seed", reg.seed, "random seed");
  cmd_reg->add_option("--dim", reg.dim, "CSV point dimension (default from transform)");
  cmd_reg->add_flag("--closed", reg.closed, "CSV rows form a closed polyline");
  cmd_reg->add_flag("--open", reg.open, "CSV rows form an open polyline");

  // normals
  std::string n_in, n_out, n_method = "auto";
  int n_k = 40, n_dim = 2;
  bool n_closed = false, n_open = false, n_flip = false;
  auto* cmd_nrm = app.add_subcommand("normals", "estimate normals and write back");
  cmd_nrm->add_option("input", n_in, "shape file")->required();
  cmd_nrm->add_option("output", n_out, "output file (defaults to input)");
  cmd_nrm->add_option("--method", n_method, "estimator")
      ->check(CLI::IsMember({"auto", "spline2d", "mesh", "knn-pca"}));
  cmd_nrm->add_option("--k", n_k, "knn-pca neighborhood size");
  cmd_nrm->add_option("--dim", n_dim, "CSV point dimension");
  cmd_nrm->add_flag("--closed", n_closed, "closed polyline");
  cmd_nrm->add_flag("--open", n_open, "open polyline");
  cmd_nrm->add_flag("--flip", n_flip, "flip the resulting orientation");

  // generate
  std::string g_shape = "curve", g_out;
  int g_n = 100, g_subdiv = 3, g_deform = 0;
  std::uint64_t g_seed = 0;
  double g_amplitude = 0.15, g_noise = 0.0, g_rotate = 0.0;
  auto* cmd_gen = app.add_subcommand("generate", "synthesize harness shapes");
  cmd_gen->add_option("--shape", g_shape, "what to generate")
      ->check(CLI::IsMember({"curve", "icosphere", "torus"}));
  cmd_gen->add_option("--out", g_out, "output file")->required();
  cmd_gen->add_option("--n", g_n, "points on the curve");
  cmd_gen->add_option("--subdivisions", g_subdiv, "icosphere subdivisions");
  cmd_gen->add_option("--amplitude", g_amplitude, "Fourier amplitude / radial bump");
  cmd_gen->add_option("--deform-degree", g_deform, "apply a seeded TPS warp (1-4)");
  cmd_gen->add_option("--noise", g_noise, "Gaussian position noise sigma");
  cmd_gen->add_option("--rotate-deg", g_rotate, "rotate by this many degrees");
  cmd_gen->add_option("--seed", g_seed, "random seed");

  // experiment
  std::string e_spec, e_out, e_summary;
  auto* cmd_exp = app.add_subcommand("experiment", "run a sweep from a JSON spec");
  cmd_exp->add_option("spec", e_spec, "experiment JSON file")->required();
  cmd_exp->add_option("--out", e_out, "CSV output (default stdout)");
  cmd_exp->add_option("--summary", e_summary, "also write a JSON summary here");

  // evaluate
  std::string v_a, v_b;
  int v_dim = 2;
  auto* cmd_eval = app.add_subcommand("evaluate", "mean error between aligned files");
  cmd_eval->add_option("aligned", v_a, "transformed model file")->required();
  cmd_eval->add_option("reference", v_b, "ground-truth file")->required();
  cmd_eval->add_option("--dim", v_dim, "CSV point dimension");

  // interpolate
  std::vector<std::string> i_files;
  std::vector<double> i_alphas;
  std::string i_out;
  auto* cmd_interp = app.add_subcommand("interpolate", "blend transform JSON files");
  cmd_interp->add_option("--transforms", i_files, "transform JSON files")->required();
  cmd_interp->add_option("--alphas", i_alphas, "blend weights, one per transform")->required();
  cmd_interp->add_option("--out", i_out, "output transform JSON (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cmd_reg) return run_register(reg);

    if (*cmd_nrm) {
      OrientedPointSet shape = load_shape(n_in, n_dim, n_closed, n_open);
      if (n_method == "spline2d" ||
          (n_method == "auto" && shape.dim() == 2 &&
           shape.connectivity != OrientedPointSet::Connectivity::none)) {
        shape.normals = normals_spline2d(
            shape.points,
            shape.connectivity == OrientedPointSet::Connectivity::closed_polyline);
      } else if (n_method == "mesh" || (n_method == "auto" && !shape.faces.empty())) {
        shape.normals = normals_mesh(shape.points, shape.faces);
      } else {
        shape.normals = normals_knn_pca(shape.points, n_k);
      }
      if (n_flip) shape.normals = -shape.normals;
      save_shape(n_out.empty() ? n_in : n_out, shape);
      return 0;
    }

    if (*cmd_gen) {
      OrientedPointSet shape;
      if (g_shape == "curve") shape = gen_curve(g_n, g_seed, g_amplitude);
      else if (g_shape == "icosphere") shape = gen_icosphere(g_subdiv);
      else shape = gen_torus(24, 12);
      if (g_shape == "icosphere" && g_amplitude > 0.0 && g_amplitude != 0.15)
        shape = perturb_radial(shape, g_amplitude, g_seed);
      if (g_deform > 0) shape = deform_tps(shape, g_deform, g_seed + 1);
      if (g_rotate != 0.0) {
        const double rad = g_rotate * kPi / 180.0;
        const Transform rot =
            shape.dim() == 2
                ? Transform{Rotation2D{rad}}
                : Transform{Rotation3D::from_axis_angle({0.0, 0.0, 1.0}, rad)};
        shape = apply_transform(rot, shape);
      }
      if (g_noise > 0.0) shape = add_gauss_noise(shape, g_noise, g_seed + 2);
      save_shape(g_out, shape);
      return 0;
    }

    if (*cmd_exp) {
      const json j = read_json_file(e_spec);
      ExperimentSpec spec;
      spec.scenario = scenario_from_string(j.at("scenario"));
      spec.sweep = j.at("sweep").get<std::vector<double>>();
      if (j.contains("trials")) spec.trials = j["trials"];
      if (j.contains("n_points")) spec.n_points = j["n_points"];
      if (j.contains("seed")) spec.seed = j["seed"];
      if (j.contains("subsample_m")) spec.subsample_m = j["subsample_m"];
      if (j.contains("use_correspondences")) spec.use_correspondences = j["use_correspondences"];
      if (j.contains("annealing_steps")) spec.annealing_steps = j["annealing_steps"];
      if (j.contains("families")) {
        spec.families.clear();
        for (const auto& f : j["families"])
          spec.families.push_back(cost_family_from_string(f));
      }
      const ExperimentResult res = run_experiment(spec);
      if (e_out.empty()) {
        std::cout << res.csv();
      } else {
        std::ofstream out(e_out);
        out << res.csv();
      }
      if (!e_summary.empty()) {
        std::ofstream out(e_summary);
        out << res.summary_json() << '\n';
      }
      return 0;
    }

    if (*cmd_eval) {
      const OrientedPointSet a = load_shape(v_a, v_dim, false, false);
      const OrientedPointSet b = load_shape(v_b, v_dim, false, false);
      std::cout << mean_error(a.points, b.points) << '\n';
      return 0;
    }

    if (*cmd_interp) {
      if (i_files.size() != i_alphas.size())
        throw Error("need one alpha per transform file");
      std::vector<Transform> transforms;
      for (const auto& f : i_files) {
        const json j = read_json_file(f);
        transforms.push_back(
            transform_from_json(j.contains("transform") ? j["transform"] : j));
      }
      const json out = transform_to_json(interpolate(transforms, i_alphas));
      if (i_out.empty()) std::cout << out.dump(2) << '\n';
      else write_json_file(i_out, out);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
