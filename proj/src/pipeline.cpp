#include "dgq/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

#include "dgq/parallel.hpp"

namespace dgq {

SchemeId parse_scheme(const std::string& id) {
  if (id == "fp-ref") return SchemeId::kFpRef;
  if (id == "cw") return SchemeId::kCW;
  if (id == "gw") return SchemeId::kGW;
  if (id == "dgq-rtn") return SchemeId::kDgqRtn;
  if (id == "dgq-2p") return SchemeId::kDgq2P;
  throw std::invalid_argument("unknown scheme id '" + id +
                              "'; valid ids: fp-ref, cw, gw, dgq-rtn, dgq-2p");
}

const char* scheme_name(SchemeId id) {
  switch (id) {
    case SchemeId::kFpRef: return "fp-ref";
    case SchemeId::kCW: return "cw";
    case SchemeId::kGW: return "gw";
    case SchemeId::kDgqRtn: return "dgq-rtn";
    case SchemeId::kDgq2P: return "dgq-2p";
  }
  return "?";
}

ActQuantMode parse_act_mode(const std::string& name) {
  if (name == "none") return ActQuantMode::kNone;
  if (name == "static") return ActQuantMode::kStatic;
  if (name == "dynamic") return ActQuantMode::kDynamic;
  throw std::invalid_argument("unknown activation mode '" + name +
                              "'; valid modes: none, static, dynamic");
}

const char* act_quant_mode_name(ActQuantMode m) {
  switch (m) {
    case ActQuantMode::kNone: return "none";
    case ActQuantMode::kStatic: return "static";
    case ActQuantMode::kDynamic: return "dynamic";
  }
  return "?";
}

namespace {

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("empty calibration set");
  size_t cols = parts.front().cols;
  size_t rows = 0;
  for (const Tensor& t : parts) {
    if (t.dtype != Dtype::kF32 || t.cols != cols) {
      throw std::invalid_argument("calibration tensors must be float32 with equal widths");
    }
    rows += t.rows;
  }
  Tensor out = Tensor::f32(rows, cols);
  float* y = out.f32_data();
  for (const Tensor& t : parts) {
    std::memcpy(y, t.f32_data(), t.size() * sizeof(float));
    y += t.size();
  }
  return out;
}

std::vector<double> gemm_f64(const Tensor& A, const Tensor& B, int threads) {
  const size_t b = A.rows, h = A.cols, o = B.cols;
  if (B.rows != h) throw std::invalid_argument("gemm shape mismatch");
  std::vector<double> bt(h * o);
  const float* bd = B.f32_data();
  for (size_t i = 0; i < h; ++i) {
    for (size_t c = 0; c < o; ++c) bt[c * h + i] = double(bd[i * o + c]);
  }
  std::vector<double> out(b * o);
  const float* ad = A.f32_data();
  parallel_for(b, threads, [&](size_t r) {
    const float* arow = ad + r * h;
    for (size_t c = 0; c < o; ++c) {
      const double* bcol = bt.data() + c * h;
      double dot = 0.0;
      for (size_t i = 0; i < h; ++i) dot += double(arow[i]) * bcol[i];
      out[r * o + c] = dot;
    }
  });
  return out;
}

float static_act_scale(const Tensor& X) {
  float absmax = 0.0f;
  const float* x = X.f32_data();
  for (size_t i = 0; i < X.size(); ++i) absmax = std::max(absmax, std::fabs(x[i]));
  return float(std::max(double(absmax) / 127.0, double(kScaleFloor)));
}

// Symmetric quantize-dequantize of already-smoothed activations; this is the
// X_hat the search objectives see and exactly what the integer path divides
// back out at inference.
Tensor act_quant_dequant(const Tensor& X, ActQuantMode mode, float act_scale) {
  if (mode == ActQuantMode::kNone) return X;
  Tensor out = Tensor::f32(X.rows, X.cols);
  const float* x = X.f32_data();
  float* y = out.f32_data();
  for (size_t r = 0; r < X.rows; ++r) {
    float s;
    if (mode == ActQuantMode::kDynamic) {
      float absmax = 0.0f;
      for (size_t c = 0; c < X.cols; ++c) absmax = std::max(absmax, std::fabs(x[r * X.cols + c]));
      s = float(std::max(double(absmax) / 127.0, double(kScaleFloor)));
    } else {
      s = act_scale;
    }
    for (size_t c = 0; c < X.cols; ++c) {
      double code = std::clamp(round_half_even(double(x[r * X.cols + c]) / double(s)),
                               -127.0, 127.0);
      y[r * X.cols + c] = float(code * double(s));
    }
  }
  return out;
}

struct Metrics {
  double mse = 0.0;
  double rel_fro = 0.0;
  double max_abs = 0.0;
};

Metrics metrics_vs_ref(const std::vector<double>& ref, const double* out) {
  Metrics m;
  double sq = 0.0, ref_sq = 0.0;
  for (size_t i = 0; i < ref.size(); ++i) {
    double d = out[i] - ref[i];
    sq += d * d;
    ref_sq += ref[i] * ref[i];
    m.max_abs = std::max(m.max_abs, std::fabs(d));
  }
  m.mse = ref.empty() ? 0.0 : sq / double(ref.size());
  m.rel_fro = ref_sq > 0.0 ? std::sqrt(sq / ref_sq) : 0.0;
  return m;
}

Metrics metrics_vs_ref(const std::vector<double>& ref, const Tensor& out) {
  std::vector<double> tmp(ref.size());
  const float* y = out.f32_data();
  for (size_t i = 0; i < tmp.size(); ++i) tmp[i] = double(y[i]);
  return metrics_vs_ref(ref, tmp.data());
}

std::vector<AlphaBin> histogram(const std::vector<float>& alphas) {
  std::map<float, size_t> bins;
  for (float a : alphas) bins[a]++;
  std::vector<AlphaBin> out;
  out.reserve(bins.size());
  for (auto& [a, n] : bins) out.push_back({a, n});
  return out;
}

void audit_s8(const DgqLayer& layer, OverflowAudit& audit) {
  for (size_t i = 0; i < layer.h; ++i) {
    const size_t k = i / layer.g;
    for (size_t c = 0; c < layer.o; ++c) {
      int v = int(layer.s2.i8_at(k, c)) *
              (int(layer.codes.u4_at(i, c)) - int(layer.zp.u4_at(k, c)));
      audit.s8_min = std::min(audit.s8_min, v);
      audit.s8_max = std::max(audit.s8_max, v);
      if (v < -127 || v > 127) audit.violations++;
    }
  }
}

ActMode to_act_mode(ActQuantMode m) {
  if (m == ActQuantMode::kStatic) return ActMode::kStatic;
  if (m == ActQuantMode::kDynamic) return ActMode::kDynamic;
  throw std::invalid_argument("DGQ schemes require static or dynamic activation quantization");
}

double round6(double v) { return std::round(v * 1e6) / 1e6; }

}  // namespace

LayerReport run_layer(const Tensor& W, const std::vector<Tensor>& calib,
                      const Tensor& eval_X, const std::vector<Scheme>& schemes,
                      const SearchConfig& cfg, const std::string& name) {
  using clock = std::chrono::steady_clock;
  if (W.dtype != Dtype::kF32) throw std::invalid_argument("weights must be float32");
  const size_t h = W.rows, o = W.cols;
  cfg.validate(h);
  if (eval_X.cols != h) throw std::invalid_argument("eval activations must have h columns");

  LayerReport rep;
  rep.name = name;
  rep.h = h;
  rep.o = o;
  rep.g = cfg.group_size;
  rep.eval_rows = eval_X.rows;

  auto t0 = clock::now();
  std::vector<float> z = channel_maxima(calib);
  SmoothScale smooth = compute_smooth(z, cfg.percentile);
  if (cfg.fp16_scales) {
    for (float& v : smooth.k) v = std::max(1.0f, fp16_round(v));
  }
  Tensor Ws = smooth_weights(W, smooth);
  Tensor Xc = concat_rows(calib);
  rep.calib_rows = Xc.rows;
  Tensor Xc_s = smooth_activations(Xc, smooth);
  Tensor Xe_s = smooth_activations(eval_X, smooth);
  float act_scale = static_act_scale(Xc_s);
  if (cfg.fp16_scales) act_scale = fp16_round(act_scale);

  std::vector<double> ref = gemm_f64(Xe_s, Ws, cfg.threads);

  SearchConfig base = cfg;
  base.calib_X = Xc_s;

  // Phase-1 results and quantized calibration activations are shared between
  // schemes that agree on group size and activation mode.
  std::map<int, Tensor> xhat_by_mode;
  auto get_xhat = [&](ActQuantMode m) -> const Tensor& {
    auto it = xhat_by_mode.find(int(m));
    if (it == xhat_by_mode.end()) {
      it = xhat_by_mode.emplace(int(m), act_quant_dequant(Xc_s, m, act_scale)).first;
    }
    return it->second;
  };
  std::map<std::pair<size_t, int>, GroupParams> p1_cache;
  auto get_phase1 = [&](size_t group, ActQuantMode m) -> const GroupParams& {
    auto key = std::make_pair(group, int(m));
    auto it = p1_cache.find(key);
    if (it == p1_cache.end()) {
      SearchConfig c1 = base;
      c1.group_size = group;
      auto s0 = clock::now();
      it = p1_cache.emplace(key, phase1_search(Ws, c1, get_xhat(m))).first;
      rep.search_ms += std::chrono::duration<double, std::milli>(clock::now() - s0).count();
    }
    return it->second;
  };

  bool have_bytes = false;
  for (const Scheme& scheme : schemes) {
    SchemeReport sr;
    sr.scheme = scheme_name(scheme.id);
    sr.act_mode = act_quant_mode_name(scheme.id == SchemeId::kFpRef ? ActQuantMode::kNone
                                                                    : scheme.act);
    Metrics m;
    switch (scheme.id) {
      case SchemeId::kFpRef: {
        m = metrics_vs_ref(ref, ref.data());
        break;
      }
      case SchemeId::kCW:
      case SchemeId::kGW: {
        size_t group = scheme.id == SchemeId::kCW ? h : cfg.group_size;
        const GroupParams& gp = get_phase1(group, scheme.act);
        Tensor w_hat = dequantize_with_group_params(Ws, gp);
        Tensor x_hat_e = act_quant_dequant(Xe_s, scheme.act, act_scale);
        std::vector<double> out = gemm_f64(x_hat_e, w_hat, cfg.threads);
        m = metrics_vs_ref(ref, out.data());
        break;
      }
      case SchemeId::kDgqRtn:
      case SchemeId::kDgq2P: {
        ActMode mode = to_act_mode(scheme.act);
        const GroupParams& gp = get_phase1(cfg.group_size, scheme.act);
        DualSearchResult dual;
        if (scheme.id == SchemeId::kDgq2P) {
          auto s0 = clock::now();
          dual = phase2_search(Ws, gp, base, get_xhat(scheme.act));
          rep.search_ms += std::chrono::duration<double, std::milli>(clock::now() - s0).count();
          rep.alpha_hist_phase1 = histogram(std::vector<float>(
              gp.alpha.f32_data(), gp.alpha.f32_data() + gp.alpha.size()));
          rep.alpha_hist_phase2 = histogram(dual.col_alpha);
        } else {
          dual = rtn_dgq(Ws, gp);
        }
        DgqLayer layer = pack_layer(dual.params, dual.codes, smooth.k, act_scale, mode,
                                    cfg.fp16_scales);
        ForwardResult fw = dgq_forward(eval_X, layer, {}, cfg.threads);
        m = metrics_vs_ref(ref, fw.out);
        rep.audit.max_abs_acc = std::max<long long>(rep.audit.max_abs_acc, fw.max_abs_acc);
        audit_s8(layer, rep.audit);
        rep.bytes = byte_accounting(layer);
        have_bytes = true;
        break;
      }
    }
    sr.mse = m.mse;
    sr.rel_fro = m.rel_fro;
    sr.max_abs_err = m.max_abs;
    rep.schemes.push_back(sr);
  }
  if (!have_bytes) rep.bytes = byte_accounting(h, o, cfg.group_size);
  rep.eval_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  return rep;
}

nlohmann::ordered_json layer_report_json(const LayerReport& rep) {
  nlohmann::ordered_json j;
  j["name"] = rep.name;
  j["h"] = rep.h;
  j["o"] = rep.o;
  j["g"] = rep.g;
  j["calib_rows"] = rep.calib_rows;
  j["eval_rows"] = rep.eval_rows;
  nlohmann::ordered_json schemes = nlohmann::ordered_json::array();
  for (const SchemeReport& s : rep.schemes) {
    nlohmann::ordered_json js;
    js["scheme"] = s.scheme;
    js["activation_mode"] = s.act_mode;
    js["mse"] = s.mse;
    js["rel_fro_error"] = s.rel_fro;
    js["max_abs_err"] = s.max_abs_err;
    schemes.push_back(js);
  }
  j["schemes"] = schemes;
  j["overflow_audit"] = {{"max_abs_acc", rep.audit.max_abs_acc},
                         {"s8_min", rep.audit.s8_min},
                         {"s8_max", rep.audit.s8_max},
                         {"violations", rep.audit.violations}};
  j["bytes"] = {{"weight_bytes", rep.bytes.weight_bytes},
                {"scale_bytes", rep.bytes.scale_bytes},
                {"total_bytes", rep.bytes.total},
                {"ratio_vs_int8", rep.bytes.ratio_vs_int8},
                {"ratio_vs_fp16", rep.bytes.ratio_vs_fp16}};
  auto hist_json = [](const std::vector<AlphaBin>& hist) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const AlphaBin& b : hist) {
      arr.push_back(nlohmann::ordered_json::array({round6(double(b.alpha)), b.count}));
    }
    return arr;
  };
  j["alpha_histogram_phase1"] = hist_json(rep.alpha_hist_phase1);
  j["alpha_histogram_phase2"] = hist_json(rep.alpha_hist_phase2);
  return j;
}

QuantizeOutcome quantize_layer(const Tensor& W, const std::vector<Tensor>& calib,
                               SchemeId scheme, ActMode mode, const SearchConfig& cfg) {
  if (scheme != SchemeId::kDgqRtn && scheme != SchemeId::kDgq2P) {
    throw std::invalid_argument("quantize_layer supports dgq-rtn and dgq-2p only");
  }
  cfg.validate(W.rows);
  QuantizeOutcome out;
  std::vector<float> z = channel_maxima(calib);
  out.smooth = compute_smooth(z, cfg.percentile);
  if (cfg.fp16_scales) {
    for (float& v : out.smooth.k) v = std::max(1.0f, fp16_round(v));
  }
  Tensor Ws = smooth_weights(W, out.smooth);
  Tensor Xc = concat_rows(calib);
  Tensor Xc_s = smooth_activations(Xc, out.smooth);
  float act_scale = static_act_scale(Xc_s);
  if (cfg.fp16_scales) act_scale = fp16_round(act_scale);

  SearchConfig base = cfg;
  base.calib_X = Xc_s;
  ActQuantMode qmode = mode == ActMode::kStatic ? ActQuantMode::kStatic : ActQuantMode::kDynamic;
  Tensor x_hat = act_quant_dequant(Xc_s, qmode, act_scale);
  GroupParams gp = phase1_search(Ws, base, x_hat);
  DualSearchResult dual;
  if (scheme == SchemeId::kDgq2P) {
    dual = phase2_search(Ws, gp, base, x_hat);
    out.alpha_hist_phase1 = histogram(std::vector<float>(
        gp.alpha.f32_data(), gp.alpha.f32_data() + gp.alpha.size()));
    out.alpha_hist_phase2 = histogram(dual.col_alpha);
  } else {
    dual = rtn_dgq(Ws, gp);
  }
  out.layer = pack_layer(dual.params, dual.codes, out.smooth.k, act_scale, mode,
                         cfg.fp16_scales);

  std::vector<double> ref = gemm_f64(Xc_s, Ws, cfg.threads);
  ForwardResult fw = dgq_forward(Xc, out.layer, {}, cfg.threads);
  Metrics m = metrics_vs_ref(ref, fw.out);
  out.calib_mse = m.mse;
  out.calib_rel_fro = m.rel_fro;
  return out;
}

namespace {

Tensor tensor_from_spec(const nlohmann::json& spec, const std::filesystem::path& base,
                        uint64_t fallback_seed, bool has_fallback) {
  if (spec.is_string()) {
    std::filesystem::path p = spec.get<std::string>();
    if (p.is_relative()) p = base / p;
    return read_tensor(p.string());
  }
  if (!spec.is_object()) throw std::invalid_argument("tensor spec must be a path or an object");
  size_t rows = spec.at("rows").get<size_t>();
  size_t cols = spec.at("cols").get<size_t>();
  uint64_t seed;
  if (spec.contains("seed")) {
    seed = spec.at("seed").get<uint64_t>();
  } else if (has_fallback) {
    seed = fallback_seed;
  } else {
    throw std::invalid_argument("synthetic tensor spec needs a seed");
  }
  OutlierSpec os;
  os.count = spec.value("outlier_count", size_t(0));
  os.magnitude = spec.value("outlier_magnitude", 1.0f);
  if (spec.contains("column_seed")) os.column_seed = spec.at("column_seed").get<uint64_t>();
  return gen_synthetic(rows, cols, seed, os);
}

}  // namespace

std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw io_error("cannot open manifest: " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("manifest " + path + " is not valid JSON: " + e.what());
  }
  std::string base = std::filesystem::path(path).parent_path().string();
  std::vector<ManifestEntry> entries;
  if (!doc.contains("layers")) return entries;
  size_t idx = 0;
  for (const auto& jl : doc.at("layers")) {
    ManifestEntry e;
    e.name = jl.value("name", "layer" + std::to_string(idx));
    e.base_dir = base;
    bool has_seed = jl.contains("seed");
    uint64_t seed = has_seed ? jl.at("seed").get<uint64_t>() : 0;

    if (jl.contains("weight_file")) {
      e.weight_spec = jl.at("weight_file");
    } else {
      e.weight_spec = jl.at("weight_synth");
      if (!e.weight_spec.contains("seed") && has_seed) e.weight_spec["seed"] = seed;
    }
    const auto& jcal = jl.contains("calib_files") ? jl.at("calib_files") : jl.at("calib_synth");
    if (!jcal.is_array() || jcal.empty()) {
      throw std::invalid_argument("layer '" + e.name + "' needs a non-empty calibration list");
    }
    size_t ci = 0;
    for (const auto& jc : jcal) {
      nlohmann::json spec = jc;
      if (spec.is_object() && !spec.contains("seed") && has_seed) spec["seed"] = seed + 100 + ci;
      e.calib_specs.push_back(spec);
      ++ci;
    }
    if (jl.contains("eval_file")) {
      e.eval_spec = jl.at("eval_file");
    } else {
      e.eval_spec = jl.at("eval_synth");
      if (!e.eval_spec.contains("seed") && has_seed) e.eval_spec["seed"] = seed + 200;
    }

    e.cfg.group_size = jl.value("group_size", size_t(128));
    e.cfg.n_bits_w = jl.value("n_bits_w", 4);
    if (jl.contains("grid1")) e.cfg.alpha_grid_phase1 = jl.at("grid1").get<std::vector<float>>();
    if (jl.contains("grid2")) e.cfg.alpha_grid_phase2 = jl.at("grid2").get<std::vector<float>>();
    e.cfg.percentile = jl.value("percentile", 0.005f);
    e.cfg.fp16_scales = jl.value("fp16_scales", false);

    ActQuantMode act = parse_act_mode(jl.value("activation_mode", "dynamic"));
    if (!jl.contains("schemes") || !jl.at("schemes").is_array() || jl.at("schemes").empty()) {
      throw std::invalid_argument("layer '" + e.name + "' needs a non-empty scheme list");
    }
    for (const auto& js : jl.at("schemes")) {
      SchemeId id = parse_scheme(js.get<std::string>());
      e.schemes.push_back({id, id == SchemeId::kFpRef ? ActQuantMode::kNone : act});
    }
    entries.push_back(std::move(e));
    ++idx;
  }
  return entries;
}

ManifestLayer materialize_layer(const ManifestEntry& entry) {
  ManifestLayer ml;
  ml.name = entry.name;
  ml.schemes = entry.schemes;
  ml.cfg = entry.cfg;
  std::filesystem::path base(entry.base_dir);
  ml.weights = tensor_from_spec(entry.weight_spec, base, 0, false);
  for (const auto& spec : entry.calib_specs) {
    ml.calib.push_back(tensor_from_spec(spec, base, 0, false));
  }
  ml.eval = tensor_from_spec(entry.eval_spec, base, 0, false);
  ml.cfg.validate(ml.weights.rows);
  return ml;
}

SuiteResult run_suite(const std::string& manifest_path, const std::string& out_dir,
                      int threads) {
  SuiteResult res;
  std::vector<ManifestEntry> entries = load_manifest(manifest_path);

  nlohmann::ordered_json jlayers = nlohmann::ordered_json::array();
  for (const ManifestEntry& entry : entries) {
    try {
      ManifestLayer ml = materialize_layer(entry);
      if (threads > 0) ml.cfg.threads = threads;
      LayerReport rep = run_layer(ml.weights, ml.calib, ml.eval, ml.schemes, ml.cfg, ml.name);
      jlayers.push_back(layer_report_json(rep));
      res.layers.push_back(std::move(rep));
    } catch (const std::exception& e) {
      res.failures.push_back(entry.name + ": " + e.what());
      nlohmann::ordered_json jf;
      jf["name"] = entry.name;
      jf["error"] = e.what();
      jlayers.push_back(jf);
    }
  }

  nlohmann::ordered_json agg;
  agg["manifest"] = std::filesystem::path(manifest_path).filename().string();
  agg["layer_count"] = entries.size();
  agg["layers"] = jlayers;

  // aggregate statistics over successful layers
  std::map<std::string, std::pair<double, size_t>> mse_by_scheme;
  std::vector<double> ratio_2p_vs_gw;
  bool rtn_ge_2p = true, have_rtn_2p = false;
  for (const LayerReport& rep : res.layers) {
    double mse_gw = -1.0, mse_2p = -1.0, mse_rtn = -1.0;
    for (const SchemeReport& s : rep.schemes) {
      auto& acc = mse_by_scheme[s.scheme];
      acc.first += s.mse;
      acc.second += 1;
      if (s.scheme == "gw") mse_gw = s.mse;
      if (s.scheme == "dgq-2p") mse_2p = s.mse;
      if (s.scheme == "dgq-rtn") mse_rtn = s.mse;
    }
    if (mse_gw > 0.0 && mse_2p >= 0.0) ratio_2p_vs_gw.push_back(mse_2p / mse_gw);
    if (mse_rtn >= 0.0 && mse_2p >= 0.0) {
      have_rtn_2p = true;
      if (mse_rtn < mse_2p) rtn_ge_2p = false;
    }
  }
  nlohmann::ordered_json jmean;
  for (const auto& [scheme, acc] : mse_by_scheme) {
    jmean[scheme] = acc.first / double(acc.second);
  }
  nlohmann::ordered_json jagg;
  jagg["mean_mse_by_scheme"] = jmean;
  jagg["ratio_2p_vs_gw"] = ratio_2p_vs_gw;
  if (!ratio_2p_vs_gw.empty()) {
    std::vector<double> sorted = ratio_2p_vs_gw;
    std::sort(sorted.begin(), sorted.end());
    size_t n = sorted.size();
    double median = (n % 2 == 1) ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    jagg["median_ratio_2p_vs_gw"] = median;
  }
  if (have_rtn_2p) jagg["rtn_mse_ge_2p_on_all_layers"] = rtn_ge_2p;
  agg["aggregate"] = jagg;
  agg["failures"] = res.failures;
  res.aggregate = agg;

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::filesystem::path dir(out_dir);
    {
      std::ofstream f(dir / "aggregate.json", std::ios::trunc);
      if (!f) throw io_error("cannot write " + (dir / "aggregate.json").string());
      f << agg.dump(2) << "\n";
    }
    for (const LayerReport& rep : res.layers) {
      std::ofstream f(dir / (rep.name + ".json"), std::ios::trunc);
      if (!f) throw io_error("cannot write layer report for " + rep.name);
      f << layer_report_json(rep).dump(2) << "\n";
    }
  }
  return res;
}

}  // namespace dgq
