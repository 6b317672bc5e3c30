// dgq - command-line surface over the dual-grained quantization pipeline.
//
// Subcommands: gen | calibrate | quantize | eval | compare | info.
// Machine-readable JSON goes to stdout (or a file via --json); diagnostics
// and progress go to stderr. Exit code 0 iff the command succeeded.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dgq/format.hpp"
#include "dgq/kernel.hpp"
#include "dgq/pipeline.hpp"
#include "dgq/smoothing.hpp"
#include "dgq/tensor.hpp"

namespace {

using nlohmann::ordered_json;

void emit_json(const ordered_json& j, const std::string& dest) {
  if (dest.empty() || dest == "-") {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream f(dest, std::ios::trunc);
    if (!f) throw dgq::io_error("cannot write JSON to " + dest);
    f << j.dump(2) << "\n";
  }
}

ordered_json hist_json(const std::vector<dgq::AlphaBin>& hist) {
  ordered_json arr = ordered_json::array();
  for (const auto& b : hist) {
    arr.push_back(ordered_json::array({std::round(double(b.alpha) * 1e6) / 1e6, b.count}));
  }
  return arr;
}

std::vector<dgq::Tensor> load_tensors(const std::vector<std::string>& paths) {
  std::vector<dgq::Tensor> out;
  out.reserve(paths.size());
  for (const std::string& p : paths) out.push_back(dgq::read_tensor(p));
  return out;
}

struct GridOpts {
  std::vector<float> grid1;
  std::vector<float> grid2;

  void apply(dgq::SearchConfig& cfg) const {
    if (!grid1.empty()) cfg.alpha_grid_phase1 = grid1;
    if (!grid2.empty()) cfg.alpha_grid_phase2 = grid2;
  }
};

int cmd_gen(const std::string& out, size_t rows, size_t cols, uint64_t seed,
            size_t outlier_count, float outlier_magnitude, int64_t column_seed) {
  dgq::OutlierSpec spec;
  spec.count = outlier_count;
  spec.magnitude = outlier_magnitude;
  if (column_seed >= 0) spec.column_seed = uint64_t(column_seed);
  dgq::Tensor t = dgq::gen_synthetic(rows, cols, seed, spec);
  dgq::write_tensor(t, out);
  std::cerr << "wrote " << rows << "x" << cols << " float32 tensor to " << out << "\n";
  return 0;
}

int cmd_calibrate(const std::vector<std::string>& calib_paths, float percentile,
                  const std::string& out_prefix) {
  auto calib = load_tensors(calib_paths);
  std::vector<float> z = dgq::channel_maxima(calib);
  dgq::SmoothScale smooth = dgq::compute_smooth(z, percentile);
  const size_t h = smooth.k.size();

  // Smoothed per-tensor activation scale for static mode.
  float absmax = 0.0f;
  size_t total_rows = 0;
  for (const dgq::Tensor& t : calib) total_rows += t.rows;
  dgq::Tensor stacked = dgq::Tensor::f32(total_rows, h);
  {
    float* dst = stacked.f32_data();
    for (const dgq::Tensor& t : calib) {
      std::memcpy(dst, t.f32_data(), t.size() * sizeof(float));
      dst += t.size();
    }
  }
  {
    const float* x = stacked.f32_data();
    for (size_t r = 0; r < total_rows; ++r) {
      for (size_t c = 0; c < h; ++c) {
        absmax = std::max(absmax, std::fabs(x[r * h + c] / smooth.k[c]));
      }
    }
  }
  float act_scale = float(std::max(double(absmax) / 127.0, 1e-8));

  dgq::write_tensor(dgq::Tensor::f32(1, h, std::vector<float>(smooth.k)), out_prefix + ".k.dgt");
  dgq::write_tensor(stacked, out_prefix + ".calib.dgt");
  ordered_json j;
  j["h"] = h;
  j["calib_rows"] = total_rows;
  j["percentile"] = double(percentile);
  j["threshold"] = double(smooth.threshold);
  j["act_scale"] = double(act_scale);
  j["files"] = calib_paths;
  emit_json(j, out_prefix + ".json");
  std::cerr << "calibration bundle written to " << out_prefix << ".{k.dgt,calib.dgt,json}\n";
  return 0;
}

int cmd_quantize(const std::string& weights_path, const std::string& bundle_prefix,
                 const std::string& out_path, size_t group_size, const std::string& mode,
                 const std::string& scheme, const GridOpts& grids, bool fp16_scales,
                 int threads, const std::string& json_dest) {
  dgq::Tensor W = dgq::read_tensor(weights_path);
  dgq::Tensor calib = dgq::read_tensor(bundle_prefix + ".calib.dgt");
  if (calib.cols != W.rows) {
    throw std::invalid_argument("calibration width " + std::to_string(calib.cols) +
                                " does not match weight rows " + std::to_string(W.rows));
  }
  dgq::SearchConfig cfg;
  cfg.group_size = group_size;
  grids.apply(cfg);
  cfg.fp16_scales = fp16_scales;
  cfg.threads = threads;
  dgq::SchemeId id = dgq::parse_scheme(scheme);
  dgq::ActMode am = mode == "static" ? dgq::ActMode::kStatic : dgq::ActMode::kDynamic;

  dgq::QuantizeOutcome outcome = dgq::quantize_layer(W, {calib}, id, am, cfg);
  dgq::write_dgq(outcome.layer, out_path);
  dgq::ByteAccounting bytes = dgq::byte_accounting(outcome.layer);

  std::cerr << "quantized " << W.rows << "x" << W.cols << " (g=" << group_size << ", "
            << scheme << ", " << mode << ")\n"
            << "  calib output mse: " << outcome.calib_mse
            << "  rel fro: " << outcome.calib_rel_fro << "\n"
            << "  bytes: " << bytes.total << " (vs int8 " << bytes.ratio_vs_int8
            << ", vs fp16 " << bytes.ratio_vs_fp16 << ")\n";

  ordered_json j;
  j["weights"] = weights_path;
  j["scheme"] = scheme;
  j["mode"] = mode;
  j["group_size"] = group_size;
  j["h"] = outcome.layer.h;
  j["o"] = outcome.layer.o;
  j["calib_mse"] = outcome.calib_mse;
  j["calib_rel_fro"] = outcome.calib_rel_fro;
  j["bytes"] = {{"weight_bytes", bytes.weight_bytes},
                {"scale_bytes", bytes.scale_bytes},
                {"total_bytes", bytes.total},
                {"ratio_vs_int8", bytes.ratio_vs_int8},
                {"ratio_vs_fp16", bytes.ratio_vs_fp16}};
  j["alpha_histogram_phase1"] = hist_json(outcome.alpha_hist_phase1);
  j["alpha_histogram_phase2"] = hist_json(outcome.alpha_hist_phase2);
  if (!json_dest.empty()) emit_json(j, json_dest);
  return 0;
}

int cmd_eval(const std::string& layer_path, const std::string& weights_path,
             const std::string& eval_path, int threads, const std::string& json_dest) {
  dgq::DgqLayer layer = dgq::read_dgq(layer_path);
  dgq::Tensor W = dgq::read_tensor(weights_path);
  dgq::Tensor X = dgq::read_tensor(eval_path);
  if (W.rows != layer.h || W.cols != layer.o) {
    throw std::invalid_argument("reference weight shape does not match the artifact");
  }
  if (X.cols != layer.h) {
    throw std::invalid_argument("eval activations must have " + std::to_string(layer.h) +
                                " columns");
  }

  // Reference: smoothed operands in double precision.
  dgq::SmoothScale smooth;
  smooth.k = layer.k;
  smooth.threshold = 1.0f;
  smooth.percentile = 0.005f;
  dgq::Tensor Ws = dgq::smooth_weights(W, smooth);
  dgq::Tensor Xs = dgq::smooth_activations(X, smooth);

  dgq::ForwardResult fw = dgq::dgq_forward(X, layer, {}, threads);
  const float* out = fw.out.f32_data();
  double sq = 0.0, refsq = 0.0, maxabs = 0.0;
  {
    const size_t b = Xs.rows, h = layer.h, o = layer.o;
    const float* xs = Xs.f32_data();
    const float* ws = Ws.f32_data();
    for (size_t r = 0; r < b; ++r) {
      for (size_t c = 0; c < o; ++c) {
        double dot = 0.0;
        for (size_t i = 0; i < h; ++i) dot += double(xs[r * h + i]) * double(ws[i * o + c]);
        double d = double(out[r * o + c]) - dot;
        sq += d * d;
        refsq += dot * dot;
        maxabs = std::max(maxabs, std::fabs(d));
      }
    }
  }
  const size_t n = X.rows * layer.o;
  dgq::ByteAccounting bytes = dgq::byte_accounting(layer);

  int s8_min = 0, s8_max = 0;
  {
    dgq::Tensor w_s8 = fw.w_s8;
    const int8_t* w = w_s8.i8_data();
    for (size_t i = 0; i < w_s8.size(); ++i) {
      s8_min = std::min(s8_min, int(w[i]));
      s8_max = std::max(s8_max, int(w[i]));
    }
  }

  ordered_json j;
  j["layer"] = layer_path;
  j["h"] = layer.h;
  j["o"] = layer.o;
  j["g"] = layer.g;
  j["mode"] = dgq::act_mode_name(layer.mode);
  j["eval_rows"] = X.rows;
  j["mse"] = n ? sq / double(n) : 0.0;
  j["rel_fro_error"] = refsq > 0 ? std::sqrt(sq / refsq) : 0.0;
  j["max_abs_err"] = maxabs;
  j["overflow_audit"] = {{"max_abs_acc", fw.max_abs_acc},
                         {"s8_min", s8_min},
                         {"s8_max", s8_max},
                         {"violations", 0}};
  j["bytes"] = {{"weight_bytes", bytes.weight_bytes},
                {"scale_bytes", bytes.scale_bytes},
                {"total_bytes", bytes.total},
                {"ratio_vs_int8", bytes.ratio_vs_int8},
                {"ratio_vs_fp16", bytes.ratio_vs_fp16}};
  emit_json(j, json_dest);
  std::cerr << "eval mse " << (n ? sq / double(n) : 0.0) << " over " << X.rows
            << " rows\n";
  return 0;
}

int cmd_compare(const std::string& manifest, const std::string& out_dir, int threads) {
  dgq::SuiteResult res = dgq::run_suite(manifest, out_dir, threads);
  std::cout << res.aggregate.dump(2) << "\n";
  if (!res.failures.empty()) {
    for (const std::string& f : res.failures) std::cerr << "layer failed: " << f << "\n";
    return 1;
  }
  return 0;
}

int cmd_info(const std::string& path, const std::string& json_dest) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw dgq::io_error("cannot open: " + path);
  char magic[4] = {0, 0, 0, 0};
  f.read(magic, 4);
  f.close();
  ordered_json j;
  j["path"] = path;
  if (std::string(magic, 4) == "DGT1") {
    dgq::Tensor t = dgq::read_tensor(path);
    j["format"] = "DGT1";
    j["dtype"] = dgq::dtype_name(t.dtype);
    j["rows"] = t.rows;
    j["cols"] = t.cols;
    j["payload_bytes"] = t.data.size();
  } else if (std::string(magic, 4) == "DGQ1") {
    dgq::DgqLayer layer = dgq::read_dgq(path);
    dgq::ByteAccounting bytes = dgq::byte_accounting(layer);
    j["format"] = "DGQ1";
    j["h"] = layer.h;
    j["o"] = layer.o;
    j["g"] = layer.g;
    j["n_g"] = layer.n_g();
    j["mode"] = dgq::act_mode_name(layer.mode);
    j["act_scale"] = double(layer.act_scale);
    j["total_bytes"] = bytes.total;
    j["ratio_vs_int8"] = bytes.ratio_vs_int8;
    j["ratio_vs_fp16"] = bytes.ratio_vs_fp16;
  } else {
    throw dgq::format_error(dgq::format_error::kind::bad_magic,
                            "unrecognized magic in " + path);
  }
  emit_json(j, json_dest);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual-grained quantization toolkit"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = hardware)");

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic DGT1 tensor");
  std::string gen_out;
  size_t gen_rows = 0, gen_cols = 0, gen_outliers = 0;
  uint64_t gen_seed = 0;
  float gen_mag = 1.0f;
  int64_t gen_colseed = -1;
  gen->add_option("--out", gen_out)->required();
  gen->add_option("--rows", gen_rows)->required();
  gen->add_option("--cols", gen_cols)->required();
  gen->add_option("--seed", gen_seed)->required();
  gen->add_option("--outlier-count", gen_outliers);
  gen->add_option("--outlier-magnitude", gen_mag);
  gen->add_option("--column-seed", gen_colseed, "outlier column seed (default: --seed)");

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "derive smoothing + activation scales");
  std::vector<std::string> cal_files;
  float cal_percentile = 0.005f;
  std::string cal_out;
  cal->add_option("--calib", cal_files, "calibration DGT1 files")->required()->expected(-1);
  cal->add_option("--percentile", cal_percentile, "clipping percentile (default 0.005)");
  cal->add_option("--out", cal_out, "output bundle prefix")->required();

  // quantize
  auto* qz = app.add_subcommand("quantize", "two-phase search and DGQ1 packing");
  std::string qz_weights, qz_bundle, qz_out, qz_mode = "dynamic", qz_scheme = "dgq-2p";
  std::string qz_json;
  size_t qz_group = 128;
  GridOpts qz_grids;
  bool qz_fp16 = false;
  qz->add_option("--weights", qz_weights)->required();
  qz->add_option("--calib-bundle", qz_bundle, "prefix written by calibrate")->required();
  qz->add_option("--out", qz_out)->required();
  qz->add_option("--group-size", qz_group, "group size (default 128)");
  qz->add_option("--mode", qz_mode, "static|dynamic (default dynamic)")
      ->check(CLI::IsMember({"static", "dynamic"}));
  qz->add_option("--scheme", qz_scheme, "dgq-2p|dgq-rtn")
      ->check(CLI::IsMember({"dgq-2p", "dgq-rtn"}));
  qz->add_option("--grid1", qz_grids.grid1, "phase-1 alpha grid")->delimiter(',');
  qz->add_option("--grid2", qz_grids.grid2, "phase-2 alpha grid")->delimiter(',');
  qz->add_flag("--fp16-scales", qz_fp16, "round stored scales through binary16");
  qz->add_option("--json", qz_json, "write a JSON summary ('-' for stdout)");

  // eval
  auto* ev = app.add_subcommand("eval", "run the integer pipeline on an artifact");
  std::string ev_layer, ev_weights, ev_eval, ev_json;
  ev->add_option("--layer", ev_layer, "DGQ1 artifact")->required();
  ev->add_option("--weights", ev_weights, "float reference weights")->required();
  ev->add_option("--eval", ev_eval, "evaluation activations")->required();
  ev->add_option("--json", ev_json, "JSON destination (default stdout)");

  // compare
  auto* cp = app.add_subcommand("compare", "run a manifest suite");
  std::string cp_manifest, cp_out;
  cp->add_option("--manifest", cp_manifest)->required();
  cp->add_option("--out", cp_out, "directory for aggregate + per-layer JSON");

  // info
  auto* in = app.add_subcommand("info", "describe a DGT1/DGQ1 file");
  std::string in_path, in_json;
  in->add_option("--input", in_path)->required();
  in->add_option("--json", in_json, "JSON destination (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      return cmd_gen(gen_out, gen_rows, gen_cols, gen_seed, gen_outliers, gen_mag,
                     gen_colseed);
    }
    if (cal->parsed()) return cmd_calibrate(cal_files, cal_percentile, cal_out);
    if (qz->parsed()) {
      return cmd_quantize(qz_weights, qz_bundle, qz_out, qz_group, qz_mode, qz_scheme,
                          qz_grids, qz_fp16, threads, qz_json);
    }
    if (ev->parsed()) return cmd_eval(ev_layer, ev_weights, ev_eval, threads, ev_json);
    if (cp->parsed()) return cmd_compare(cp_manifest, cp_out, threads);
    if (in->parsed()) return cmd_info(in_path, in_json);
  } catch (const dgq::validation_error& e) {
    std::cerr << "error: " << e.what() << " (field: " << e.field() << ")\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
