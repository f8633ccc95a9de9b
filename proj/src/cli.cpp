#include "polar/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "polar/fresnel.hpp"
#include "polar/io.hpp"
#include "polar/losses.hpp"
#include "polar/polar_core.hpp"
#include "polar/separate.hpp"
#include "polar/synth.hpp"

namespace polar::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

int verbosity() {
  const char* v = std::getenv("POLAR_VERBOSE");
  return v ? std::atoi(v) : 0;
}

unsigned worker_count() {
  if (const char* v = std::getenv("POLAR_THREADS")) {
    const int n = std::atoi(v);
    if (n > 0) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot write " + path.string());
  f << text;
}

/// Metadata sidecar written next to every command's outputs, including on
/// failure.
class Sidecar {
 public:
  Sidecar(std::string command, fs::path path)
      : path_(std::move(path)) {
    doc_["command"] = std::move(command);
    doc_["version"] = kVersion;
    doc_["status"] = "running";
    doc_["inputs"] = json::object();
    doc_["config"] = json::object();
    doc_["outputs"] = json::array();
  }
  json& inputs() { return doc_["inputs"]; }
  json& config() { return doc_["config"]; }
  json& doc() { return doc_; }
  void output(const fs::path& p) { doc_["outputs"].push_back(p.filename().string()); }
  void finish(const std::string& status, const std::string& error = {}) {
    doc_["status"] = status;
    if (!error.empty()) doc_["error"] = error;
    if (!path_.empty()) write_text(path_, doc_.dump(2) + "\n");
  }

 private:
  fs::path path_;
  json doc_;
};

struct LoadedStack {
  PolarizedStack stack;
  int bit_depth = 12;
};

MosaicPattern parse_pattern(const std::string& text) {
  MosaicPattern p;
  std::stringstream ss(text);
  std::string item;
  std::size_t k = 0;
  while (std::getline(ss, item, ',')) {
    if (k >= 4) throw ParameterError("pattern needs exactly 4 entries");
    p.position[k++] = std::stoi(item);
  }
  if (k != 4) throw ParameterError("pattern needs exactly 4 entries");
  p.validate();
  return p;
}

LoadedStack load_stack(const fs::path& path, int bit_depth,
                       const MosaicPattern& pattern) {
  if (path.extension() == ".png") {
    io::Png16 png = io::read_png16(path);
    const int depth = png.bit_depth < 16 ? png.bit_depth : bit_depth;
    return {demux_mosaic(make_mosaic(std::move(png.image), depth, pattern)),
            depth};
  }
  return {io::tensor_to_stack(io::read_tensor(path)), bit_depth};
}

Image load_image(const fs::path& path, double full_scale) {
  if (path.extension() == ".png") {
    io::Png16 png = io::read_png16(path);
    const double top = static_cast<double>((1u << png.bit_depth) - 1u);
    Image img(png.image.width(), png.image.height());
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = png.image[i] / top;
    return img;
  }
  Image img = io::tensor_to_image(io::read_tensor(path));
  for (auto& v : img.pixels()) v /= full_scale;
  return img;
}

fs::path prepare_dir(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

void save_tensor(Sidecar& meta, const fs::path& path, const io::Tensor& t) {
  io::write_tensor(path, t);
  meta.output(path);
}

// Runs `body` and records the outcome in the sidecar. Out-of-range flag
// values are usage errors; every other library error maps to the
// data/solver exit code.
template <typename Body>
int guarded(Sidecar& meta, std::ostream& err, Body&& body) {
  const auto fail = [&](const std::exception& e, int code) {
    err << "error: " << e.what() << "\n";
    try {
      meta.finish("error", e.what());
    } catch (const std::exception& e2) {
      err << "error: could not write metadata: " << e2.what() << "\n";
    }
    return code;
  };
  try {
    body();
    meta.finish("ok");
    return kOk;
  } catch (const ParameterError& e) {
    return fail(e, kUsageError);
  } catch (const std::exception& e) {
    return fail(e, kDataError);
  }
}

std::string curve_csv(const std::vector<fresnel::DopSample>& rows) {
  std::string s = "theta_deg,rho_r,rho_t\n";
  for (const auto& r : rows) {
    s += format_number(r.theta_deg) + "," + format_number(r.rho_r) + "," +
         format_number(r.rho_t) + "\n";
  }
  return s;
}

std::vector<double> default_alpha_grid() {
  std::vector<double> a = {0.01};
  for (int k = 1; k <= 20; ++k) a.push_back(0.05 * k);
  return a;
}

json synth_config_json(const synth::SynthConfig& c) {
  json j;
  j["a"] = c.a;
  j["b"] = c.b;
  j["n"] = c.n;
  j["theta_deg"] = c.incidence * 180.0 / kPi;
  j["rho_r_override"] = c.dop_r_override ? json(*c.dop_r_override) : json();
  j["rho_t_override"] = c.dop_t_override ? json(*c.dop_t_override) : json();
  j["phi_r"] = c.aop_r;
  j["phi_t"] = c.aop_t ? json(*c.aop_t) : json();
  j["noise_sigma"] = c.noise_sigma;
  j["bit_depth"] = c.bit_depth;
  j["seed"] = c.seed;
  return j;
}

void write_triple(const synth::TriplePair& tp, const fs::path& dir,
                  const json& inputs, std::ostream& err) {
  Sidecar meta("synth", dir / "meta.json");
  meta.inputs() = inputs;
  meta.config() = synth_config_json(tp.config);
  meta.doc()["storage"] = {{"container", "PMRT u16 (4, H, W)"},
                           {"mosaic_png_shift", 16 - tp.config.bit_depth}};
  save_tensor(meta, dir / "M.pmrt", io::stack_to_tensor(tp.m, io::DType::u16));
  save_tensor(meta, dir / "R.pmrt", io::stack_to_tensor(tp.r, io::DType::u16));
  save_tensor(meta, dir / "T.pmrt", io::stack_to_tensor(tp.t, io::DType::u16));
  const RawMosaic mosaic = remux_mosaic(tp.m, {}, tp.config.bit_depth);
  io::write_png16(dir / "M_mosaic.png", mosaic.data, tp.config.bit_depth);
  meta.output(dir / "M_mosaic.png");
  meta.doc()["rho_r"] = tp.dop_r;
  meta.doc()["rho_t"] = tp.dop_t;
  meta.doc()["scale_lsb_per_unit"] = tp.scale;
  meta.doc()["cleaning"] = {{"verdict", synth::to_string(tp.verdict)},
                            {"mean_ratio", tp.mean_ratio},
                            {"clamped", tp.clamped}};
  meta.finish("ok");
  if (verbosity() > 0) err << "wrote " << dir.string() << "\n";
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err) {
  CLI::App app{"Polarized reflection separation toolkit", "polar"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // demux
  std::string demux_in;
  std::string demux_out;
  std::string pattern_text = "0,1,2,3";
  auto* demux = app.add_subcommand("demux", "split a sensor mosaic PNG into angle channels");
  demux->add_option("--in", demux_in, "mosaic PNG")->required();
  demux->add_option("--out-dir", demux_out, "output directory")->required();
  demux->add_option("--pattern", pattern_text,
                    "sub-pixel index (row*2+col) of the 0,45,90,135 channels");

  // stokes
  std::string stokes_in;
  std::string stokes_out;
  double delta = kDefaultOverexposureThreshold;
  int stokes_bits = 12;
  auto* stokes = app.add_subcommand("stokes", "intensity, DoP, AoP and overexposure mask");
  stokes->add_option("--in", stokes_in, "mosaic PNG or PMRT stack")->required();
  stokes->add_option("--out-dir", stokes_out, "output directory")->required();
  stokes->add_option("--delta", delta, "overexposure threshold")->capture_default_str();
  stokes->add_option("--bit-depth", stokes_bits, "bit depth of PMRT input")->capture_default_str();
  stokes->add_option("--pattern", pattern_text, "mosaic pattern");

  // synth
  synth::SynthConfig scfg;
  double theta_deg = 0.0;
  std::optional<double> rho_r;
  std::optional<double> rho_t;
  std::optional<double> phi_t_deg;
  double phi_r_deg = 0.0;
  std::string base_r;
  std::string base_t;
  int synth_size = 64;
  int synth_count = 1;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "generate {M, R, T} triples");
  synth_cmd->add_option("--a", scfg.a, "reflection mix")->capture_default_str();
  synth_cmd->add_option("--b", scfg.b, "transmission mix")->capture_default_str();
  synth_cmd->add_option("--n", scfg.n, "refractive index")->capture_default_str();
  synth_cmd->add_option("--theta-deg", theta_deg, "incidence angle (degrees)")->capture_default_str();
  synth_cmd->add_option("--rho-r", rho_r, "override reflection DoP");
  synth_cmd->add_option("--rho-t", rho_t, "override transmission DoP");
  synth_cmd->add_option("--phi-r-deg", phi_r_deg, "reflection AoP (degrees)");
  synth_cmd->add_option("--phi-t-deg", phi_t_deg, "transmission AoP (degrees); random when unset");
  synth_cmd->add_option("--noise-sigma", scfg.noise_sigma, "Gaussian noise (LSB)")->capture_default_str();
  synth_cmd->add_option("--bit-depth", scfg.bit_depth, "sensor bit depth")->capture_default_str();
  synth_cmd->add_option("--seed", scfg.seed, "random seed")->capture_default_str();
  synth_cmd->add_option("--base-r", base_r, "reflection base image (PNG16 or PMRT)");
  synth_cmd->add_option("--base-t", base_t, "transmission base image (PNG16 or PMRT)");
  synth_cmd->add_option("--size", synth_size, "procedural base size when no base images are given")->capture_default_str();
  synth_cmd->add_option("--count", synth_count, "number of triples (seed, seed+1, ...)")->capture_default_str();
  synth_cmd->add_option("--out-dir", synth_out, "output directory")->required();

  // clean
  std::string clean_r;
  std::string clean_t;
  std::string clean_out;
  auto* clean = app.add_subcommand("clean", "apply the mean-ratio and negative-value cleaning rules");
  clean->add_option("--r", clean_r, "reflection PMRT stack")->required();
  clean->add_option("--t", clean_t, "transmission PMRT stack")->required();
  clean->add_option("--out-dir", clean_out, "output directory")->required();

  // separate
  SeparatorConfig sep;
  std::string sep_in;
  std::string sep_out;
  int sep_bits = 12;
  auto* sep_cmd = app.add_subcommand("separate", "two-stage reflection / transmission separation");
  sep_cmd->add_option("--in", sep_in, "mosaic PNG or PMRT stack")->required();
  sep_cmd->add_option("--out-dir", sep_out, "output directory")->required();
  sep_cmd->add_option("--lambda-pol", sep.lambda_pol, "weight of the transmission depolarization term")->capture_default_str();
  sep_cmd->add_option("--lambda-pncc", sep.lambda_pncc, "weight of the PNCC term")->capture_default_str();
  sep_cmd->add_option("--lambda-tv", sep.lambda_tv, "weight of the total variation terms")->capture_default_str();
  sep_cmd->add_option("--step", sep.step_size, "initial step size")->capture_default_str();
  sep_cmd->add_option("--max-iters", sep.max_iters, "iteration cap per stage")->capture_default_str();
  sep_cmd->add_option("--tol", sep.tol, "relative objective decrease for convergence")->capture_default_str();
  sep_cmd->add_option("--seed", sep.seed, "recorded in the metadata")->capture_default_str();
  sep_cmd->add_option("--bit-depth", sep_bits, "bit depth of PMRT input")->capture_default_str();
  sep_cmd->add_option("--pattern", pattern_text, "mosaic pattern");

  // pncc-curve
  std::string curve_r;
  std::string curve_t;
  std::string curve_out;
  int curve_size = 128;
  std::uint64_t curve_seed = 0;
  std::vector<double> alphas;
  auto* pncc_cmd = app.add_subcommand("pncc-curve", "PNCC over the alpha-mixture family");
  pncc_cmd->add_option("--r", curve_r, "reflection image (PNG16 or PMRT)");
  pncc_cmd->add_option("--t", curve_t, "transmission image (PNG16 or PMRT)");
  pncc_cmd->add_option("--size", curve_size, "procedural image size when no inputs are given")->capture_default_str();
  pncc_cmd->add_option("--seed", curve_seed, "procedural seed")->capture_default_str();
  pncc_cmd->add_option("--alpha", alphas, "alpha values (default 0.01, 0.05, 0.10, ..., 1.0)");
  pncc_cmd->add_option("--out", curve_out, "CSV path (stdout when omitted)");

  // fresnel-curve
  double curve_n = 1.7;
  int samples = 91;
  std::string fresnel_out;
  auto* fresnel_cmd = app.add_subcommand("fresnel-curve", "DoP of reflected and transmitted light");
  fresnel_cmd->add_option("--n", curve_n, "refractive index")->capture_default_str();
  fresnel_cmd->add_option("--samples", samples, "grid points over [0, 90] degrees")->capture_default_str();
  fresnel_cmd->add_option("--out", fresnel_out, "CSV path (stdout when omitted)");

  // demo-linearity
  std::string demo_dir;
  std::string demo_out;
  std::uint64_t demo_seed = 0;
  int demo_size = 64;
  double demo_theta = 56.0;
  auto* demo = app.add_subcommand("demo-linearity", "compare M - R on raw and gamma data");
  demo->add_option("--triple-dir", demo_dir, "directory with M.pmrt, R.pmrt, T.pmrt");
  demo->add_option("--seed", demo_seed, "seed of the generated triple")->capture_default_str();
  demo->add_option("--size", demo_size, "size of the generated triple")->capture_default_str();
  demo->add_option("--theta-deg", demo_theta, "incidence angle of the generated triple")->capture_default_str();
  demo->add_option("--out-dir", demo_out, "directory for report.json");

  std::vector<std::string> argv_store = {"polar"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  // Flag values that are parsed but still need validation count as usage
  // errors, not data errors.
  MosaicPattern pattern;
  try {
    pattern = parse_pattern(pattern_text);
  } catch (const std::exception& e) {
    err << "error: --pattern: " << e.what() << "\n";
    return kUsageError;
  }

  if (demux->parsed()) {
    const fs::path dir = prepare_dir(demux_out);
    Sidecar meta("demux", dir / "meta.json");
    meta.inputs()["in"] = demux_in;
    meta.config()["pattern"] = pattern.position;
    return guarded(meta, err, [&] {
      io::Png16 png = io::read_png16(demux_in);
      const int depth = png.bit_depth;
      const PolarizedStack s =
          demux_mosaic(make_mosaic(std::move(png.image), depth, pattern));
      meta.config()["bit_depth"] = depth;
      save_tensor(meta, dir / "stack.pmrt", io::stack_to_tensor(s, io::DType::u16));
      for (int k = 0; k < 4; ++k) {
        Image16 ch(s.width(), s.height());
        for (std::size_t i = 0; i < ch.size(); ++i) {
          ch[i] = static_cast<std::uint16_t>(s[k][i]);
        }
        const fs::path p = dir / ("I" + std::to_string(k + 1) + ".png");
        io::write_png16(p, ch, depth);
        meta.output(p);
      }
    });
  }

  if (stokes->parsed()) {
    const fs::path dir = prepare_dir(stokes_out);
    Sidecar meta("stokes", dir / "meta.json");
    meta.inputs()["in"] = stokes_in;
    meta.config()["delta"] = delta;
    return guarded(meta, err, [&] {
      const LoadedStack in = load_stack(stokes_in, stokes_bits, pattern);
      const double full = static_cast<double>((1u << in.bit_depth) - 1u);
      meta.config()["bit_depth"] = in.bit_depth;
      const StokesMaps st = compute_stokes(in.stack, delta, full);
      save_tensor(meta, dir / "I.pmrt", io::image_to_tensor(st.intensity));
      save_tensor(meta, dir / "rho.pmrt", io::image_to_tensor(st.dop));
      save_tensor(meta, dir / "phi.pmrt", io::image_to_tensor(st.aop));
      save_tensor(meta, dir / "mask.pmrt", io::mask_to_tensor(st.mask));
      std::size_t over = 0;
      for (auto v : st.mask.pixels()) over += v == 0;
      meta.doc()["dop_clamped"] = st.dop_clamped;
      meta.doc()["overexposed_pixels"] = over;
      meta.doc()["aop_range"] = "[-pi/2, pi/2)";
    });
  }

  if (synth_cmd->parsed()) {
    const fs::path dir = prepare_dir(synth_out);
    Sidecar meta("synth", dir / "batch.json");
    scfg.incidence = theta_deg * kPi / 180.0;
    scfg.dop_r_override = rho_r;
    scfg.dop_t_override = rho_t;
    scfg.aop_r = phi_r_deg * kPi / 180.0;
    if (phi_t_deg) scfg.aop_t = *phi_t_deg * kPi / 180.0;
    meta.config() = synth_config_json(scfg);
    meta.config()["count"] = synth_count;
    return guarded(meta, err, [&] {
      scfg.validate();
      if (synth_count < 1) throw ParameterError("--count must be positive");
      if (base_r.empty() != base_t.empty()) {
        throw ParameterError("--base-r and --base-t must be given together");
      }
      const double full = static_cast<double>(scfg.ceiling());
      std::optional<Image> img_r;
      std::optional<Image> img_t;
      if (!base_r.empty()) {
        img_r = load_image(base_r, full);
        img_t = load_image(base_t, full);
      }
      json inputs = {{"base_r", base_r.empty() ? json("procedural") : json(base_r)},
                     {"base_t", base_t.empty() ? json("procedural") : json(base_t)},
                     {"size", synth_size}};
      meta.inputs() = inputs;

      // Output directories are disjoint per index, so workers never share
      // files.
      std::atomic<int> next{0};
      std::mutex err_mutex;
      std::string first_error;
      auto work = [&] {
        for (int i = next++; i < synth_count; i = next++) {
          try {
            synth::SynthConfig c = scfg;
            c.seed = scfg.seed + static_cast<std::uint64_t>(i);
            const Image r = img_r ? *img_r
                                  : synth::procedural_base(synth_size, synth_size,
                                                           2 * c.seed + 1);
            const Image t = img_t ? *img_t
                                  : synth::procedural_base(synth_size, synth_size,
                                                           2 * c.seed + 2);
            const fs::path sub =
                synth_count == 1 ? dir : dir / ("triple_" + std::to_string(i));
            fs::create_directories(sub);
            std::ostringstream log;
            write_triple(synth::make_triple(r, t, c), sub, inputs, log);
            std::lock_guard lock(err_mutex);
            err << log.str();
          } catch (const std::exception& e) {
            std::lock_guard lock(err_mutex);
            if (first_error.empty()) first_error = e.what();
          }
        }
      };
      const unsigned n = std::min<unsigned>(worker_count(),
                                            static_cast<unsigned>(synth_count));
      std::vector<std::thread> pool;
      for (unsigned w = 1; w < n; ++w) pool.emplace_back(work);
      work();
      for (auto& t : pool) t.join();
      if (!first_error.empty()) throw Error(first_error);
    });
  }

  if (clean->parsed()) {
    const fs::path dir = prepare_dir(clean_out);
    Sidecar meta("clean", dir / "meta.json");
    meta.inputs() = {{"r", clean_r}, {"t", clean_t}};
    meta.config() = {{"min_ratio", synth::kMinMeanRatio},
                     {"max_ratio", synth::kMaxMeanRatio}};
    return guarded(meta, err, [&] {
      const auto r = io::tensor_to_stack(io::read_tensor(clean_r));
      const auto t = io::tensor_to_stack(io::read_tensor(clean_t));
      const synth::CleanResult res = synth::clean_pair(r, t);
      save_tensor(meta, dir / "R_clean.pmrt", io::stack_to_tensor(res.r, io::DType::f32));
      save_tensor(meta, dir / "T_clean.pmrt", io::stack_to_tensor(res.t, io::DType::f32));
      meta.doc()["verdict"] = synth::to_string(res.verdict);
      meta.doc()["mean_ratio"] = std::isfinite(res.ratio) ? json(res.ratio) : json();
      meta.doc()["clamped"] = res.clamped;
      out << synth::to_string(res.verdict) << "\n";
    });
  }

  if (sep_cmd->parsed()) {
    const fs::path dir = prepare_dir(sep_out);
    Sidecar meta("separate", dir / "meta.json");
    meta.inputs()["in"] = sep_in;
    meta.config() = {{"lambda_pol", sep.lambda_pol},
                     {"lambda_pncc", sep.lambda_pncc},
                     {"lambda_tv", sep.lambda_tv},
                     {"step_size", sep.step_size},
                     {"max_iters", sep.max_iters},
                     {"tol", sep.tol},
                     {"tv_epsilon", sep.tv_epsilon},
                     {"armijo", sep.armijo},
                     {"seed", sep.seed},
                     {"pyramid_factors", {2, 4, 8}}};
    return guarded(meta, err, [&] {
      const LoadedStack in = load_stack(sep_in, sep_bits, pattern);
      SeparationResult res;
      try {
        res = separate(in.stack, sep);
      } catch (const SolverError& e) {
        const fs::path p = dir / "R_partial.pmrt";
        io::write_tensor(p, io::stack_to_tensor(e.last_iterate(), io::DType::f32));
        meta.output(p);
        meta.doc()["failed_stage"] = e.stage();
        meta.doc()["failed_iteration"] = e.iteration();
        throw;
      }
      save_tensor(meta, dir / "R_hat.pmrt", io::stack_to_tensor(res.r_hat, io::DType::f32));
      save_tensor(meta, dir / "T_hat.pmrt", io::image_to_tensor(res.t_hat));
      std::string csv = "stage,iteration,objective\n";
      for (const auto* t : {&res.stage1, &res.stage2}) {
        const int stage = t == &res.stage1 ? 1 : 2;
        for (std::size_t i = 0; i < t->objective.size(); ++i) {
          csv += std::to_string(stage) + "," + std::to_string(i) + "," +
                 format_number(t->objective[i]) + "\n";
        }
      }
      write_text(dir / "trace.csv", csv);
      meta.output(dir / "trace.csv");
      meta.doc()["converged"] = res.converged;
      meta.doc()["stage1_iterations"] = res.stage1.iterations;
      meta.doc()["stage2_iterations"] = res.stage2.iterations;
      meta.doc()["objective_units"] = "input scaled by 1/" + format_number(res.scale);
      // Diagnostic for scenes where both layers may be polarized.
      const StokesMaps st = compute_stokes(in.stack);
      std::vector<int> hist(10, 0);
      for (double v : st.dop.pixels()) {
        ++hist[static_cast<std::size_t>(std::min(9, static_cast<int>(v * 10)))];
      }
      meta.doc()["input_dop_histogram"] = hist;
    });
  }

  if (pncc_cmd->parsed()) {
    if (curve_r.empty() != curve_t.empty()) {
      err << "error: --r and --t must be given together\n";
      return kUsageError;
    }
    const fs::path out_path(curve_out);
    Sidecar meta("pncc-curve", curve_out.empty() ? fs::path{}
                                                 : fs::path(curve_out + ".json"));
    meta.inputs() = {{"r", curve_r.empty() ? json("procedural") : json(curve_r)},
                     {"t", curve_t.empty() ? json("procedural") : json(curve_t)},
                     {"size", curve_size},
                     {"seed", curve_seed}};
    return guarded(meta, err, [&] {
      Image r;
      Image t;
      if (curve_r.empty()) {
        r = synth::procedural_base(curve_size, curve_size, 2 * curve_seed + 1);
        t = synth::procedural_base(curve_size, curve_size, 2 * curve_seed + 2);
      } else {
        r = load_image(curve_r, 1.0);
        t = load_image(curve_t, 1.0);
      }
      require_same_shape(r, t, "pncc-curve");
      const std::vector<double> grid = alphas.empty() ? default_alpha_grid() : alphas;
      std::string csv = "alpha,pncc\n";
      for (double a : grid) {
        Image ia(r.width(), r.height());
        Image ib(r.width(), r.height());
        for (std::size_t i = 0; i < r.size(); ++i) {
          ia[i] = t[i] + (1.0 - a) * r[i];
          ib[i] = a * r[i];
        }
        csv += format_number(a) + "," + format_number(pncc_value(ia, ib)) + "\n";
      }
      if (curve_out.empty()) {
        out << csv;
      } else {
        write_text(out_path, csv);
        meta.output(out_path);
      }
    });
  }

  if (fresnel_cmd->parsed()) {
    Sidecar meta("fresnel-curve", fresnel_out.empty()
                                      ? fs::path{}
                                      : fs::path(fresnel_out + ".json"));
    meta.config() = {{"n", curve_n}, {"samples", samples}};
    if (samples < 2) {
      err << "error: --samples must be at least 2\n";
      return kUsageError;
    }
    return guarded(meta, err, [&] {
      const std::string csv = curve_csv(fresnel::dop_curve(curve_n, samples));
      meta.doc()["brewster_deg"] = fresnel::brewster_angle(curve_n) * 180.0 / kPi;
      if (fresnel_out.empty()) {
        out << csv;
      } else {
        write_text(fresnel_out, csv);
        meta.output(fresnel_out);
      }
    });
  }

  if (demo->parsed()) {
    fs::path dir;
    if (!demo_out.empty()) dir = prepare_dir(demo_out);
    Sidecar meta("demo-linearity", dir.empty() ? fs::path{} : dir / "meta.json");
    meta.inputs()["triple_dir"] = demo_dir.empty() ? json("generated") : json(demo_dir);
    meta.config() = {{"seed", demo_seed}, {"size", demo_size},
                     {"theta_deg", demo_theta}, {"gamma", 1.0 / 2.2}};
    return guarded(meta, err, [&] {
      synth::TriplePair tp;
      if (demo_dir.empty()) {
        synth::SynthConfig c;
        c.seed = demo_seed;
        c.incidence = demo_theta * kPi / 180.0;
        tp = synth::make_triple(
            synth::procedural_base(demo_size, demo_size, 2 * demo_seed + 1),
            synth::procedural_base(demo_size, demo_size, 2 * demo_seed + 2), c);
      } else {
        const fs::path d(demo_dir);
        tp.m = io::tensor_to_stack(io::read_tensor(d / "M.pmrt"));
        tp.r = io::tensor_to_stack(io::read_tensor(d / "R.pmrt"));
        tp.t = io::tensor_to_stack(io::read_tensor(d / "T.pmrt"));
      }
      const synth::LinearityReport rep = synth::gamma_subtraction_demo(tp);
      json report = {{"raw_max_lsb", rep.raw.max_abs},
                     {"raw_mean_lsb", rep.raw.mean_abs},
                     {"gamma_max_lsb", rep.gamma.max_abs},
                     {"gamma_mean_lsb", rep.gamma.mean_abs},
                     {"raw_within_1_5_lsb", rep.raw.max_abs <= 1.5},
                     {"gamma_exceeds_raw", rep.gamma.mean_abs > rep.raw.mean_abs}};
      meta.doc()["report"] = report;
      out << "raw   M-R residual: max " << format_number(rep.raw.max_abs)
          << " LSB, mean " << format_number(rep.raw.mean_abs) << " LSB\n"
          << "gamma M-R residual: max " << format_number(rep.gamma.max_abs)
          << " LSB, mean " << format_number(rep.gamma.mean_abs) << " LSB\n";
      if (!dir.empty()) {
        write_text(dir / "report.json", report.dump(2) + "\n");
        meta.output(dir / "report.json");
      }
    });
  }

  err << app.help();
  return kUsageError;
}

}  // namespace polar::cli
