#include "eval/evaluate.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "core/errors.hpp"
#include "eval/matcher.hpp"
#include "eval/metrics.hpp"
#include "io/fsutil.hpp"
#include "io/png_io.hpp"
#include "io/raster_io.hpp"
#include "synth/skeleton.hpp"

namespace mlfg::eval {

using synth::Image;
using synth::OrientationField;

EnhanceResult enhance_image(const models::Enhancer<float>& model, const Image& input,
                            bool want_aux) {
  if (input.h <= 0 || input.w <= 0) throw ValidationError("enhance: empty image");
  const int H = input.h, W = input.w;
  const int Hp = (H + 31) / 32 * 32, Wp = (W + 31) / 32 * 32;

  Tensor<float> x({1, 1, H, W});
  std::copy(input.v.begin(), input.v.end(), x.data.begin());
  if (Hp != H || Wp != W) x = ops::pad_reflect_hw(x, 0, Hp - H, 0, Wp - W);

  NoGradGuard ng;
  auto out = model.forward(make_leaf(std::move(x)), /*training=*/false);

  EnhanceResult res;
  res.enhanced = Image(H, W);
  {
    auto cropped = ops::crop_hw(out.enhanced->value, 0, 0, H, W);
    std::copy(cropped.data.begin(), cropped.data.end(), res.enhanced.v.begin());
  }
  if (!want_aux) return res;

  res.gh = (H + 7) / 8;
  res.gw = (W + 7) / 8;
  auto crop_grid = [&](const Tensor<float>& t, int ch) {
    auto g = ops::crop_hw(t, 0, 0, res.gh, res.gw);
    const int64_t plane = static_cast<int64_t>(res.gh) * res.gw;
    return std::vector<float>(g.data.begin() + ch * plane, g.data.begin() + (ch + 1) * plane);
  };
  res.w_high = crop_grid(out.w_high->value, 0);
  res.w_low = crop_grid(out.w_low->value, 0);
  res.w_bg = crop_grid(out.w_bg->value, 0);
  if (out.ori_msff) {
    res.has_orientation = true;
    res.ori_msff_s = crop_grid(out.ori_msff->value, 0);
    res.ori_msff_c = crop_grid(out.ori_msff->value, 1);
    res.ori_tbsf_s = crop_grid(out.ori_tbsf->value, 0);
    res.ori_tbsf_c = crop_grid(out.ori_tbsf->value, 1);
  }
  return res;
}

std::vector<synth::MinutiaPoint> minutiae_from_image(const Image& img,
                                                     const OrientationField& fg_field) {
  Image binary(img.h, img.w);
  for (int64_t i = 0; i < img.size(); ++i)
    binary.v[static_cast<size_t>(i)] = img.v[static_cast<size_t>(i)] > 0.5f ? 1.f : 0.f;
  auto skel = synth::skeletonize(binary);
  OrientationField field = orientation_from_image(img);
  if (field.gh == fg_field.gh && field.gw == fg_field.gw) {
    for (int64_t i = 0; i < field.cells(); ++i)
      field.mask[static_cast<size_t>(i)] =
          field.mask[static_cast<size_t>(i)] && fg_field.mask[static_cast<size_t>(i)];
  }
  return synth::extract_minutiae(skel, field);
}

MetricsReport evaluate(const std::string& model_path, const std::string& dataset_dir,
                       const std::string& report_path, const EvalOptions& opts) {
  auto model = models::load_enhancer<float>(model_path);
  std::unique_ptr<models::MgModel<float>> mg;
  if (!opts.mg_checkpoint.empty()) {
    mg = models::load_mg<float>(opts.mg_checkpoint);
    mg->freeze();
  }
  auto ds = synth::load_dataset(dataset_dir);
  const int n = static_cast<int>(ds.samples.size());

  MetricsReport rep;
  rep.n_samples = n;
  double l1 = 0, mse = 0;
  double ori_acc = 0, ori_tbsf_acc = 0;
  int64_t ori_cells = 0;
  std::vector<float> auc_pred, auc_gt;
  std::vector<std::vector<synth::MinutiaPoint>> probes(static_cast<size_t>(n)),
      raw_probes(static_cast<size_t>(n)), gallery(static_cast<size_t>(n));

  for (int i = 0; i < n; ++i) {
    const auto& s = ds.samples[static_cast<size_t>(i)];
    auto enh = enhance_image(*model, s.degraded, /*want_aux=*/true);

    l1 += l1_error(enh.enhanced, s.target);
    double m = 0;
    for (int64_t k = 0; k < s.target.size(); ++k) {
      const double d = enh.enhanced.v[static_cast<size_t>(k)] - s.target.v[static_cast<size_t>(k)];
      m += d * d;
    }
    mse += m / static_cast<double>(s.target.size());

    if (enh.has_orientation) {
      OrientationField pf(enh.gh, enh.gw);
      pf.s = enh.ori_msff_s;
      pf.c = enh.ori_msff_c;
      OrientationField pt(enh.gh, enh.gw);
      pt.s = enh.ori_tbsf_s;
      pt.c = enh.ori_tbsf_c;
      for (int64_t k = 0; k < s.field.cells(); ++k) {
        if (!s.field.mask[static_cast<size_t>(k)]) continue;
        auto sq_err = [&](const OrientationField& p) {
          const double sd = p.s[static_cast<size_t>(k)] * s.field.c[static_cast<size_t>(k)] -
                            p.c[static_cast<size_t>(k)] * s.field.s[static_cast<size_t>(k)];
          const double cd = p.c[static_cast<size_t>(k)] * s.field.c[static_cast<size_t>(k)] +
                            p.s[static_cast<size_t>(k)] * s.field.s[static_cast<size_t>(k)];
          const double d = 0.5 * std::atan2(sd, cd);
          return d * d;
        };
        ori_acc += sq_err(pf);
        ori_tbsf_acc += sq_err(pt);
        ++ori_cells;
      }
    }

    if (mg) {
      Tensor<float> x({1, 1, enh.enhanced.h, enh.enhanced.w});
      std::copy(enh.enhanced.v.begin(), enh.enhanced.v.end(), x.data.begin());
      NoGradGuard ng;
      auto pred = mg->forward(make_leaf(std::move(x)), false);
      for (int64_t k = 0; k < s.minumap_grid.size(); ++k) {
        auc_pred.push_back(pred->value.data[static_cast<size_t>(k)]);
        auc_gt.push_back(s.minumap_grid.v[static_cast<size_t>(k)]);
      }
    }

    probes[static_cast<size_t>(i)] = minutiae_from_image(enh.enhanced, s.field);
    if (opts.include_raw)
      raw_probes[static_cast<size_t>(i)] = minutiae_from_image(s.degraded, s.field);
    gallery[static_cast<size_t>(i)] = s.minutiae;
  }

  rep.rec_l1 = l1 / n;
  rep.psnr = mse / n <= 1e-20 ? 200.0 : 10.0 * std::log10(1.0 / (mse / n));
  if (ori_cells > 0) {
    rep.ori_rmse_deg = std::sqrt(ori_acc / static_cast<double>(ori_cells)) * 180.0 / synth::kPi;
    rep.ori_rmse_tbsf_deg =
        std::sqrt(ori_tbsf_acc / static_cast<double>(ori_cells)) * 180.0 / synth::kPi;
  }
  if (!auc_pred.empty()) rep.minumap_auc = roc_auc(auc_pred, auc_gt);

  // Identification: each degraded probe against the clean-target gallery.
  auto run_ranks = [&](const std::vector<std::vector<synth::MinutiaPoint>>& pr) {
    std::vector<std::vector<double>> scores(static_cast<size_t>(n),
                                            std::vector<double>(static_cast<size_t>(n), 0.0));
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        scores[static_cast<size_t>(i)][static_cast<size_t>(j)] =
            match_score(pr[static_cast<size_t>(i)], gallery[static_cast<size_t>(j)]);
    std::vector<int> ids(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) ids[static_cast<size_t>(i)] = i;
    return rank_n(scores, ids, opts.ranks);
  };
  rep.rank_enhanced = run_ranks(probes);
  if (opts.include_raw) rep.rank_raw = run_ranks(raw_probes);

  write_report(report_path, rep);
  return rep;
}

bool enhance_file(const models::Enhancer<float>& model, const std::string& input_png,
                  const std::string& output_png, bool emit_aux) {
  const Image input = io::read_gray_png(input_png);
  auto res = enhance_image(model, input, emit_aux);
  io::write_gray_png(output_png, res.enhanced);
  if (!emit_aux) return false;

  const auto dot = output_png.rfind('.');
  const std::string stem = dot == std::string::npos ? output_png : output_png.substr(0, dot);
  io::write_planar_f32(stem + "_weights.f32",
                       {res.w_high.data(), res.w_low.data(), res.w_bg.data()}, res.gh, res.gw, 3);
  if (res.has_orientation) {
    io::write_planar_f32(stem + "_ori_msff.f32", {res.ori_msff_s.data(), res.ori_msff_c.data()},
                         res.gh, res.gw, 2);
    io::write_planar_f32(stem + "_ori_tbsf.f32", {res.ori_tbsf_s.data(), res.ori_tbsf_c.data()},
                         res.gh, res.gw, 2);
  }
  return res.has_orientation;
}

void regions_files(const models::Enhancer<float>& model, const std::string& input_png,
                   const std::string& out_prefix) {
  const Image input = io::read_gray_png(input_png);
  auto res = enhance_image(model, input, /*want_aux=*/true);

  auto to_full = [&](const std::vector<float>& grid) {
    Tensor<float> t({res.gh, res.gw});
    std::copy(grid.begin(), grid.end(), t.data.begin());
    auto up = ops::upsample_nearest(t, 8);
    auto cropped = ops::crop_hw(up, 0, 0, input.h, input.w);
    Image img(input.h, input.w);
    std::copy(cropped.data.begin(), cropped.data.end(), img.v.begin());
    return img;
  };
  const Image high = to_full(res.w_high);
  const Image low = to_full(res.w_low);
  const Image bg = to_full(res.w_bg);
  io::write_gray_png(out_prefix + "_high.png", high);
  io::write_gray_png(out_prefix + "_low.png", low);
  io::write_gray_png(out_prefix + "_bg.png", bg);
  io::write_rgb_png(out_prefix + "_composite.png", low, high, bg);
}

void write_report(const std::string& report_path, const MetricsReport& r) {
  io::write_file_atomic(report_path, [&](std::ostream& os) {
    char buf[128];
    auto metric = [&](const char* name, double v) {
      std::snprintf(buf, sizeof(buf), "%s,%.6g\n", name, v);
      os << buf;
    };
    metric("n_samples", r.n_samples);
    metric("rec_l1", r.rec_l1);
    metric("psnr_db", r.psnr);
    if (r.ori_rmse_deg) metric("ori_rmse_deg", *r.ori_rmse_deg);
    if (r.ori_rmse_tbsf_deg) metric("ori_rmse_tbsf_deg", *r.ori_rmse_tbsf_deg);
    if (r.minumap_auc) metric("minumap_auc", *r.minumap_auc);
    for (auto& [k, acc] : r.rank_enhanced) {
      std::snprintf(buf, sizeof(buf), "rank,%d,%.6g\n", k, acc);
      os << buf;
    }
    for (auto& [k, acc] : r.rank_raw) {
      std::snprintf(buf, sizeof(buf), "rank_raw,%d,%.6g\n", k, acc);
      os << buf;
    }
  });
  io::write_file_atomic(report_path + ".txt", [&](std::ostream& os) {
    os << "evaluation over " << r.n_samples << " samples\n";
    os << "  rec L1:       " << r.rec_l1 << "\n";
    os << "  PSNR:         " << r.psnr << " dB\n";
    if (r.ori_rmse_deg) os << "  ori RMSE:     " << *r.ori_rmse_deg << " deg (MSFF head)\n";
    if (r.ori_rmse_tbsf_deg)
      os << "  ori RMSE:     " << *r.ori_rmse_tbsf_deg << " deg (TBSF head)\n";
    if (r.minumap_auc) os << "  minumap AUC:  " << *r.minumap_auc << "\n";
    os << "  identification (enhanced";
    if (!r.rank_raw.empty()) os << " / raw";
    os << "):\n";
    for (size_t i = 0; i < r.rank_enhanced.size(); ++i) {
      os << "    rank-" << r.rank_enhanced[i].first << ": " << r.rank_enhanced[i].second;
      if (i < r.rank_raw.size()) os << " / " << r.rank_raw[i].second;
      os << "\n";
    }
  });
}

}  // namespace mlfg::eval
