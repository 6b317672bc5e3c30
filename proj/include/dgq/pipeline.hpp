#pragma once
// End-to-end orchestration: calibration -> smoothing -> two-phase search ->
// packing -> evaluation, for one layer or a manifest-driven suite, under
// comparable quantization schemes.

#include <string>
#include <vector>

#include <json.hpp>

#include "dgq/format.hpp"
#include "dgq/kernel.hpp"
#include "dgq/search.hpp"
#include "dgq/smoothing.hpp"
#include "dgq/tensor.hpp"

namespace dgq {

enum class SchemeId { kFpRef, kCW, kGW, kDgqRtn, kDgq2P };
enum class ActQuantMode { kNone, kStatic, kDynamic };

// Parses "fp-ref" | "cw" | "gw" | "dgq-rtn" | "dgq-2p"; throws
// std::invalid_argument listing the valid ids otherwise.
SchemeId parse_scheme(const std::string& id);
const char* scheme_name(SchemeId id);

ActQuantMode parse_act_mode(const std::string& name);
const char* act_quant_mode_name(ActQuantMode m);

struct Scheme {
  SchemeId id = SchemeId::kFpRef;
  ActQuantMode act = ActQuantMode::kDynamic;
};

struct SchemeReport {
  std::string scheme;
  std::string act_mode;
  double mse = 0.0;
  double rel_fro = 0.0;
  double max_abs_err = 0.0;
};

struct OverflowAudit {
  long long max_abs_acc = 0;
  int s8_min = 0;
  int s8_max = 0;
  size_t violations = 0;
};

struct AlphaBin {
  float alpha;
  size_t count;
};

struct LayerReport {
  std::string name;
  size_t h = 0, o = 0, g = 0;
  size_t calib_rows = 0, eval_rows = 0;
  std::vector<SchemeReport> schemes;
  OverflowAudit audit;
  ByteAccounting bytes;
  std::vector<AlphaBin> alpha_hist_phase1;
  std::vector<AlphaBin> alpha_hist_phase2;
  // wall-clock diagnostics; intentionally absent from the serialized report
  // so reruns are byte-identical
  double search_ms = 0.0;
  double eval_ms = 0.0;
};

LayerReport run_layer(const Tensor& W, const std::vector<Tensor>& calib,
                      const Tensor& eval_X, const std::vector<Scheme>& schemes,
                      const SearchConfig& cfg, const std::string& name = "layer");

nlohmann::ordered_json layer_report_json(const LayerReport& rep);

// One searched artifact for the CLI quantize path; calib_mse is the
// integer-pipeline output MSE against the float reference on the
// calibration activations themselves.
struct QuantizeOutcome {
  DgqLayer layer;
  SmoothScale smooth;
  double calib_mse = 0.0;
  double calib_rel_fro = 0.0;
  std::vector<AlphaBin> alpha_hist_phase1;
  std::vector<AlphaBin> alpha_hist_phase2;
};

QuantizeOutcome quantize_layer(const Tensor& W, const std::vector<Tensor>& calib,
                               SchemeId scheme, ActMode mode, const SearchConfig& cfg);

// Manifest-driven suite. Synthetic entries are materialized with
// gen_synthetic; file entries are read as DGT1 tensors relative to the
// manifest's directory. Parsing (including scheme-id validation) happens at
// load time; tensor materialization is deferred so one broken layer does not
// take the whole suite down.
struct ManifestEntry {
  std::string name;
  nlohmann::json weight_spec;
  std::vector<nlohmann::json> calib_specs;
  nlohmann::json eval_spec;
  std::string base_dir;
  std::vector<Scheme> schemes;
  SearchConfig cfg;
};

struct ManifestLayer {
  std::string name;
  Tensor weights;
  std::vector<Tensor> calib;
  Tensor eval;
  std::vector<Scheme> schemes;
  SearchConfig cfg;
};

std::vector<ManifestEntry> load_manifest(const std::string& path);
ManifestLayer materialize_layer(const ManifestEntry& entry);

struct SuiteResult {
  nlohmann::ordered_json aggregate;
  std::vector<LayerReport> layers;
  std::vector<std::string> failures;
};

// Runs every manifest layer (failures are recorded, the suite continues) and
// writes aggregate.json plus one JSON per layer into out_dir when non-empty.
SuiteResult run_suite(const std::string& manifest_path, const std::string& out_dir,
                      int threads = 0);

}  // namespace dgq
