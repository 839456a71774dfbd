#include "rbt/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "rbt/am.hpp"
#include "rbt/error.hpp"

namespace fs = std::filesystem;

namespace rbt {

namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& s) { return s.substr(0, s.find('#')); }

bool parse_real(const std::string& tok, double& v) {
  std::istringstream ss(tok);
  ss >> v;
  return !ss.fail() && ss.eof() && std::isfinite(v);
}

std::vector<double> parse_reals(const std::string& value, std::size_t count, const std::string& where) {
  std::istringstream ss(value);
  std::vector<double> out;
  std::string tok;
  while (ss >> tok) {
    double v;
    if (!parse_real(tok, v)) throw IngestionError(where + ": '" + tok + "' is not a finite number");
    out.push_back(v);
  }
  if (out.size() != count)
    throw IngestionError(where + ": expected " + std::to_string(count) + " numbers, got " + std::to_string(out.size()));
  return out;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot write '" + p.string() + "'");
  return f;
}

std::pair<int, int> parse_resolution(const std::string& s) {
  const auto x = s.find('x');
  int w = 0, h = 0;
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    std::size_t used = 0;
    w = std::stoi(s.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(s);
    h = std::stoi(s.substr(x + 1), &used);
    if (used != s.size() - x - 1) throw std::invalid_argument(s);
  } catch (const std::exception&) {
    throw InvalidInput("resolution must look like 50x50, got '" + s + "'");
  }
  if (w < 2 || h < 2) throw InvalidInput("resolution must be at least 2x2");
  return {w, h};
}

void print_components(std::ostream& out) {
  out << "am:";
  for (AMKind k : kAllAMKinds) out << ' ' << to_string(k);
  out << "\nssm:";
  for (SSMKind k : kAllSSMKinds) out << ' ' << to_string(k);
  out << "\nsm:";
  for (SMKind k : kAllSMKinds) out << ' ' << to_string(k);
  out << '\n';
}

}  // namespace

std::vector<fs::path> list_frame_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IngestionError("'" + dir.string() + "' is not a directory");
  static const std::vector<std::string> exts = {".png", ".jpg", ".jpeg", ".bmp", ".pgm", ".ppm", ".tif", ".tiff"};
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (std::find(exts.begin(), exts.end(), ext) != exts.end()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

GrayImage load_frame(const fs::path& path) {
  if (!fs::exists(path)) throw IngestionError("missing frame file '" + path.string() + "'");
  const cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw IngestionError("cannot decode frame file '" + path.string() + "'");
  std::vector<double> rgb(static_cast<std::size_t>(bgr.rows) * bgr.cols * 3);
  std::size_t k = 0;
  for (int y = 0; y < bgr.rows; ++y) {
    const cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      rgb[k++] = row[x][2];
      rgb[k++] = row[x][1];
      rgb[k++] = row[x][0];
    }
  }
  return luma_from_rgb(bgr.cols, bgr.rows, rgb);
}

GroundTruth parse_ground_truth(std::istream& in, const std::string& name) {
  GroundTruth gt;
  std::string line;
  int lineno = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (first_content) {
      first_content = false;
      std::istringstream ss(t);
      std::string tok;
      ss >> tok;
      double v;
      if (!parse_real(tok, v)) continue;  // header
    }
    const auto vals = parse_reals(t, 8, name + " line " + std::to_string(lineno));
    CornersBox b;
    for (int c = 0; c < 4; ++c) {
      b.pts(0, c) = vals[static_cast<std::size_t>(2 * c)];
      b.pts(1, c) = vals[static_cast<std::size_t>(2 * c + 1)];
    }
    gt.push_back(b);
  }
  return gt;
}

GroundTruth read_ground_truth(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw IngestionError("cannot open ground truth '" + path.string() + "'");
  return parse_ground_truth(f, path.string());
}

void write_ground_truth(const fs::path& path, const GroundTruth& gt) {
  std::ofstream f = open_out(path);
  char buf[64];
  for (const auto& b : gt) {
    for (int c = 0; c < 4; ++c) {
      for (int r = 0; r < 2; ++r) {
        // 17 significant digits round-trip doubles exactly.
        std::snprintf(buf, sizeof buf, "%.17g", b.pts(r, c));
        f << buf << (c == 3 && r == 1 ? '\n' : ' ');
      }
    }
  }
  if (!f) throw IoError("failed writing '" + path.string() + "'");
}

Sequence load_sequence(const std::vector<fs::path>& frame_files, const fs::path& gt_path) {
  Sequence seq;
  seq.gt = read_ground_truth(gt_path);
  if (frame_files.size() < 2) throw IngestionError("a sequence needs at least 2 frames");
  if (seq.gt.size() != frame_files.size())
    throw IngestionError("'" + gt_path.string() + "' has " + std::to_string(seq.gt.size()) + " boxes for " +
                         std::to_string(frame_files.size()) + " frames");
  for (const auto& p : frame_files) seq.frames.push_back(load_frame(p));
  return seq;
}

Sequence load_sequence(const fs::path& dir, const std::optional<fs::path>& gt_path) {
  return load_sequence(list_frame_files(dir), gt_path.value_or(dir / "groundtruth.txt"));
}

SyntheticScript parse_synthetic_script(std::istream& in, const std::string& name, std::uint64_t* seed) {
  SyntheticScript s;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(strip_comment(line));
    if (t.empty()) continue;
    const std::string where = name + " line " + std::to_string(lineno);
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw IngestionError(where + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    auto one = [&]() { return parse_reals(value, 1, where)[0]; };
    auto integer = [&]() {
      const double v = one();
      if (v != std::floor(v) || v < 0) throw IngestionError(where + ": expected a non-negative integer");
      return v;
    };
    if (key == "texture") {
      s.texture = value;
    } else if (key == "width") {
      s.width = static_cast<int>(integer());
    } else if (key == "height") {
      s.height = static_cast<int>(integer());
    } else if (key == "texture_seed") {
      s.texture_seed = static_cast<std::uint64_t>(integer());
    } else if (key == "texture_scale") {
      s.texture_scale = static_cast<int>(integer());
    } else if (key == "frames") {
      s.frames = static_cast<int>(integer());
    } else if (key == "box") {
      const auto v = parse_reals(value, 4, where);
      s.box = CornersBox::rect(v[0], v[1], v[2], v[3]);
    } else if (key == "motion") {
      try {
        s.motion = motion_from_string(value);
      } catch (const InvalidInput& e) {
        throw IngestionError(where + ": " + e.what());
      }
    } else if (key == "step") {
      s.step = one();
    } else if (key == "gain") {
      const auto v = parse_reals(value, 2, where);
      s.gain_min = v[0];
      s.gain_max = v[1];
    } else if (key == "bias") {
      const auto v = parse_reals(value, 2, where);
      s.bias_min = v[0];
      s.bias_max = v[1];
    } else if (key == "noise") {
      s.noise = one();
    } else if (key == "seed") {
      const auto v = static_cast<std::uint64_t>(integer());
      if (seed) *seed = v;
    } else {
      throw IngestionError(where + ": unknown key '" + key + "'");
    }
  }
  return s;
}

Sequence load_synthetic(const fs::path& script_path) {
  std::ifstream f(script_path);
  if (!f) throw IngestionError("cannot open synthetic spec '" + script_path.string() + "'");
  std::uint64_t seed = 1;
  const SyntheticScript script = parse_synthetic_script(f, script_path.string(), &seed);
  GrayImage source;
  if (script.texture == "procedural") {
    source = procedural_texture(script.width, script.height, script.texture_seed, script.texture_scale);
  } else {
    fs::path p = script.texture;
    if (p.is_relative()) p = script_path.parent_path() / p;
    source = load_frame(p);
  }
  return generate_synthetic(make_spec(script, std::move(source), seed), seed);
}

void smooth_sequence(Sequence& seq, const SmoothingConfig& cfg) {
  for (auto& f : seq.frames) f = gaussian_smooth(f, cfg);
}

Protocol protocol_from_string(const std::string& name) {
  if (name == "single") return Protocol::Single;
  if (name == "multi-init") return Protocol::MultiInit;
  if (name == "reinit") return Protocol::Reinit;
  throw InvalidInput("unknown protocol '" + name + "' (expected single, multi-init or reinit)");
}

std::string to_string(Protocol p) {
  switch (p) {
    case Protocol::Single: return "single";
    case Protocol::MultiInit: return "multi-init";
    case Protocol::Reinit: return "reinit";
  }
  return "?";
}

ResultPaths ResultPaths::in_dir(const fs::path& dir) {
  return {dir / "frames.csv", dir / "sr_curve.csv", dir / "summary.txt"};
}

Summary summarize(const ResultSet& results) {
  Summary s;
  s.reinit_count = results.reinit_count;
  const std::vector<double> errors = pooled_errors(results.runs);
  s.frame_count = errors.size();
  if (!errors.empty()) s.auc = sr_curve(errors).auc;
  double ms = 0.0;
  for (const auto& r : results.runs)
    for (double m : r.millis) ms += m;
  if (ms > 0.0) s.mean_fps = static_cast<double>(s.frame_count) / (ms / 1000.0);
  return s;
}

Summary write_results(const ResultSet& results, const ResultPaths& paths) {
  const Summary s = summarize(results);
  {
    std::ofstream f = open_out(paths.frames_csv);
    f << "run,frame,e_al,x1,y1,x2,y2,x3,y3,x4,y4,iters,ms\n";
    for (std::size_t r = 0; r < results.runs.size(); ++r) {
      const RunResult& run = results.runs[r];
      for (std::size_t i = 0; i < run.size(); ++i) {
        f << r << ',' << run.frames[i] << ',' << fixed6(run.errors[i]);
        for (int c = 0; c < 4; ++c) f << ',' << fixed6(run.corners[i].pts(0, c)) << ',' << fixed6(run.corners[i].pts(1, c));
        f << ',' << run.iterations[i] << ',' << fixed6(run.millis[i]) << '\n';
      }
    }
    if (!f) throw IoError("failed writing '" + paths.frames_csv.string() + "'");
  }
  {
    std::ofstream f = open_out(paths.sr_csv);
    f << "t_p,sr\n";
    const std::vector<double> errors = pooled_errors(results.runs);
    if (!errors.empty()) {
      const SRCurve c = sr_curve(errors);
      for (std::size_t i = 0; i < c.thresholds.size(); ++i) f << fixed6(c.thresholds[i]) << ',' << fixed6(c.rates[i]) << '\n';
    }
    if (!f) throw IoError("failed writing '" + paths.sr_csv.string() + "'");
  }
  {
    std::ofstream f = open_out(paths.summary);
    f << "tracker = " << results.tracker << '\n'
      << "protocol = " << to_string(results.protocol) << '\n'
      << "runs = " << results.runs.size() << '\n'
      << "frames = " << s.frame_count << '\n'
      << "auc = " << fixed6(s.auc) << '\n'
      << "mean_fps = " << fixed6(s.mean_fps) << '\n'
      << "reinit_count = " << s.reinit_count << '\n';
    if (!f) throw IoError("failed writing '" + paths.summary.string() + "'");
  }
  return s;
}

ResultSet run_protocol(const TrackerSpec& spec, const Sequence& seq, Protocol protocol, bool timing) {
  if (seq.frames.size() < 2) throw InvalidInput("a sequence needs at least 2 frames");
  if (seq.gt.size() != seq.frames.size()) throw InvalidInput("ground truth length differs from frame count");
  const TrackerConfig cfg = spec.tracker;
  const TrackerFactory factory = [cfg]() { return make_tracker(cfg); };
  EvalOptions opts;
  opts.projection = cfg.ssm;
  opts.timing = timing;
  ResultSet res;
  res.tracker = factory()->name();
  res.protocol = protocol;
  switch (protocol) {
    case Protocol::Single:
      res.runs.push_back(run_single(factory, seq.frames, seq.gt, 0, opts));
      break;
    case Protocol::MultiInit:
      res.runs = run_multi_init(factory, seq.frames, seq.gt, opts);
      break;
    case Protocol::Reinit: {
      ReinitResult r = run_reinit(factory, seq.frames, seq.gt, 20.0, 5, opts);
      res.reinit_count = r.reinit_count;
      res.runs.push_back(std::move(r.run));
      break;
    }
  }
  return res;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Registration-based tracking benchmark"};
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_config("--config", "", "key = value file; command-line flags take precedence");

  std::string am = "ssim", ssm = "homography", sm = "esm", protocol = "single";
  std::string seq, gt, out_dir = ".", resolution = "50x50";
  int max_iters = 30;
  double stop_norm = 1e-4;
  std::uint64_t seed = 0;
  bool list = false, timing = false, smoothing = true;
  NNConfig nn;
  PFConfig pf;

  app.add_option("--am", am, "appearance model")->capture_default_str();
  app.add_option("--ssm", ssm, "state-space model")->capture_default_str();
  app.add_option("--sm", sm, "search method")->capture_default_str();
  app.add_option("--seq", seq, "frame directory or synthetic spec file");
  app.add_option("--gt", gt, "ground-truth file (default <seq>/groundtruth.txt)");
  app.add_option("--protocol", protocol, "single | multi-init | reinit")->capture_default_str();
  app.add_option("--resolution", resolution, "sampling resolution WxH")->capture_default_str();
  app.add_option("--max-iters", max_iters, "gradient-descent iterations per frame")->capture_default_str();
  app.add_option("--stop-norm", stop_norm, "corner-change stopping threshold (px)")->capture_default_str();
  app.add_option("--seed", seed, "seed for stochastic search methods")->capture_default_str();
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--smoothing", smoothing, "5x5 Gaussian smoothing at ingestion")->capture_default_str();
  app.add_option("--nn-samples", nn.samples, "NN index size")->capture_default_str();
  app.add_option("--nn-sigma", nn.corner_sigma, "NN sampler spread (rms corner px)")->capture_default_str();
  app.add_option("--pf-particles", pf.particles, "PF particle count")->capture_default_str();
  app.add_option("--pf-sigma", pf.corner_sigma, "PF dynamics spread (rms corner px)")->capture_default_str();
  app.add_flag("--timing", timing, "record per-frame wall time (outputs then differ run to run)");
  app.add_flag("--list-components", list, "print available AMs, SSMs and SMs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  if (list) {
    print_components(out);
    return 0;
  }

  try {
    if (seq.empty()) throw InvalidInput("--seq is required");
    TrackerSpec spec;
    spec.tracker.am = am_from_string(am);
    spec.tracker.ssm = ssm_from_string(ssm);
    spec.tracker.sm = sm_from_string(sm);
    std::tie(spec.tracker.res_x, spec.tracker.res_y) = parse_resolution(resolution);
    if (max_iters < 1) throw InvalidInput("--max-iters must be positive");
    if (!(stop_norm > 0.0)) throw InvalidInput("--stop-norm must be positive");
    spec.tracker.gd.max_iters = max_iters;
    spec.tracker.gd.stop_norm = stop_norm;
    spec.tracker.seed = seed;
    spec.tracker.nn = nn;
    spec.tracker.pf = pf;
    spec.smoothing = smoothing;
    const Protocol proto = protocol_from_string(protocol);
    make_tracker(spec.tracker);  // validates the combination before loading data

    Sequence sequence;
    if (fs::is_directory(seq)) {
      sequence = load_sequence(fs::path(seq), gt.empty() ? std::nullopt : std::optional<fs::path>(gt));
    } else if (fs::is_regular_file(seq)) {
      sequence = load_synthetic(seq);
      if (!gt.empty()) sequence.gt = read_ground_truth(gt);
      if (sequence.gt.size() != sequence.frames.size()) throw IngestionError("ground truth length differs from frame count");
    } else {
      throw IngestionError("--seq '" + seq + "' does not exist");
    }
    if (spec.smoothing) smooth_sequence(sequence, spec.smooth);

    const ResultSet results = run_protocol(spec, sequence, proto, timing);
    fs::create_directories(out_dir);
    const Summary s = write_results(results, ResultPaths::in_dir(out_dir));
    out << results.tracker << " " << to_string(proto) << ": frames=" << s.frame_count << " auc=" << fixed6(s.auc)
        << " reinits=" << s.reinit_count << '\n';
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace rbt
