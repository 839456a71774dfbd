#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rbt/eval.hpp"
#include "rbt/sm.hpp"
#include "rbt/synthetic.hpp"

namespace rbt {

// Image files (png, jpg, jpeg, bmp, pgm, ppm, tif, tiff) in `dir`, sorted by name.
std::vector<std::filesystem::path> list_frame_files(const std::filesystem::path& dir);

// Decodes any OpenCV-readable image to luma.
GrayImage load_frame(const std::filesystem::path& path);

// gt: one line per frame "x1 y1 x2 y2 x3 y3 x4 y4" (TL, TR, BR, BL); an
// optional first line starting with a non-numeric token is skipped.
GroundTruth parse_ground_truth(std::istream& in, const std::string& name);
GroundTruth read_ground_truth(const std::filesystem::path& path);
void write_ground_truth(const std::filesystem::path& path, const GroundTruth& gt);

// Frame files plus ground truth; counts must agree and be >= 2.
Sequence load_sequence(const std::vector<std::filesystem::path>& frame_files, const std::filesystem::path& gt_path);

// Directory of frames; gt defaults to <dir>/groundtruth.txt.
Sequence load_sequence(const std::filesystem::path& dir, const std::optional<std::filesystem::path>& gt_path);

// key = value synthetic description (grammar in README).
SyntheticScript parse_synthetic_script(std::istream& in, const std::string& name, std::uint64_t* seed = nullptr);
Sequence load_synthetic(const std::filesystem::path& script_path);

// Gaussian smoothing of every frame, done once at ingestion.
void smooth_sequence(Sequence& seq, const SmoothingConfig& cfg);

enum class Protocol { Single, MultiInit, Reinit };
Protocol protocol_from_string(const std::string& name);
std::string to_string(Protocol p);

struct TrackerSpec {
  TrackerConfig tracker;
  bool smoothing = true;
  SmoothingConfig smooth;
};

struct ResultSet {
  std::string tracker;
  Protocol protocol = Protocol::Single;
  std::vector<RunResult> runs;
  int reinit_count = 0;
};

struct ResultPaths {
  std::filesystem::path frames_csv;
  std::filesystem::path sr_csv;
  std::filesystem::path summary;

  static ResultPaths in_dir(const std::filesystem::path& dir);
};

struct Summary {
  double auc = 0.0;
  double mean_fps = 0.0;  // 0 when timing was not recorded
  int reinit_count = 0;
  std::size_t frame_count = 0;
};

Summary summarize(const ResultSet& results);

// frames.csv: run,frame,e_al,x1,y1,x2,y2,x3,y3,x4,y4,iters,ms
// sr_curve.csv: t_p,sr
// summary.txt: key = value lines
// All reals with 6 decimals.
Summary write_results(const ResultSet& results, const ResultPaths& paths);

ResultSet run_protocol(const TrackerSpec& spec, const Sequence& seq, Protocol protocol, bool timing);

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rbt
