#ifndef SMAT_EVAL_METRICS_HPP
#define SMAT_EVAL_METRICS_HPP

#include "smat/assignment.hpp"
#include "smat/box.hpp"
#include "smat/voxel_map.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <string>

namespace smat {

// ---------------------------------------------------------------- maps

struct MapScore {
  std::optional<double> pr;  // percent; empty when gt_static is empty
  std::optional<double> rr;  // percent; empty when gt_dynamic is empty
  std::optional<double> f1;  // [0, 1]; needs both pr and rr
  double resolution = 0.2;
};

inline MapScore score_map(const VoxelMap& estimated, const VoxelMap& gt_static, const VoxelMap& gt_dynamic,
                          double resolution) {
  if (estimated.resolution() != resolution || gt_static.resolution() != resolution ||
      gt_dynamic.resolution() != resolution)
    throw ValidationError("score_map: all maps must share the evaluation resolution");
  MapScore s;
  s.resolution = resolution;
  if (!gt_static.empty())
    s.pr = 100.0 * static_cast<double>(estimated.intersection_size(gt_static)) / static_cast<double>(gt_static.size());
  if (!gt_dynamic.empty())
    s.rr = 100.0 * (1.0 - static_cast<double>(estimated.intersection_size(gt_dynamic)) /
                              static_cast<double>(gt_dynamic.size()));
  if (s.pr && s.rr) {
    const double p = *s.pr / 100.0, r = *s.rr / 100.0;
    s.f1 = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }
  return s;
}

/// "PR 100.00 RR 100.00 F1 1.0000"; undefined values print as "undefined".
inline std::string format_map_score(const MapScore& s) {
  auto fmt = [](const std::optional<double>& v, int digits) {
    if (!v) return std::string("undefined");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, *v);
    return std::string(buf);
  };
  return "PR " + fmt(s.pr, 2) + " RR " + fmt(s.rr, 2) + " F1 " + fmt(s.f1, 4);
}

// ---------------------------------------------------------------- tracks

struct TrackRecord {
  int frame = 0;
  int id = 0;
  BoundingBox box;

  friend bool operator==(const TrackRecord&, const TrackRecord&) = default;
};

inline void validate_tracks(std::span<const TrackRecord> records, const char* what) {
  std::set<std::pair<int, int>> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].box.valid())
      throw ValidationError(std::string(what) + ": invalid box at record " + std::to_string(i));
    if (!seen.emplace(records[i].frame, records[i].id).second)
      throw ValidationError(std::string(what) + ": duplicate (frame " + std::to_string(records[i].frame) + ", id " +
                            std::to_string(records[i].id) + ")");
  }
}

struct FrameMatch {
  std::vector<std::pair<std::size_t, std::size_t>> tp;  // (gt index, pr index) into the inputs
  std::vector<std::size_t> fn;
  std::vector<std::size_t> fp;
};

namespace detail {

/// Optimal one-to-one matching: most pairs with IoU >= alpha, then most
/// total IoU over those pairs.
inline FrameMatch match_boxes(std::span<const BoundingBox> gt, std::span<const BoundingBox> pr, double alpha) {
  FrameMatch out;
  const auto n = static_cast<Eigen::Index>(gt.size());
  const auto m = static_cast<Eigen::Index>(pr.size());
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, m);
  const double bonus = static_cast<double>(std::min(n, m)) + 1.0;
  bool any = false;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      const double iou = iou_3d(gt[static_cast<std::size_t>(i)], pr[static_cast<std::size_t>(j)]);
      if (iou >= alpha) {
        w(i, j) = bonus + iou;
        any = true;
      }
    }
  std::vector<char> pr_used(pr.size(), 0);
  const std::vector<int> assign = any ? max_weight_assignment(w) : std::vector<int>(gt.size(), -1);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const int j = assign[i];
    if (j >= 0 && w(static_cast<Eigen::Index>(i), j) > 0.0) {
      out.tp.emplace_back(i, static_cast<std::size_t>(j));
      pr_used[static_cast<std::size_t>(j)] = 1;
    } else {
      out.fn.push_back(i);
    }
  }
  for (std::size_t j = 0; j < pr.size(); ++j)
    if (!pr_used[j]) out.fp.push_back(j);
  return out;
}

struct FrameIndex {
  std::map<int, std::vector<std::size_t>> gt, pr;  // frame -> record indices
  std::set<int> frames;
};

inline FrameIndex index_frames(std::span<const TrackRecord> gt, std::span<const TrackRecord> pr) {
  FrameIndex ix;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    ix.gt[gt[i].frame].push_back(i);
    ix.frames.insert(gt[i].frame);
  }
  for (std::size_t i = 0; i < pr.size(); ++i) {
    ix.pr[pr[i].frame].push_back(i);
    ix.frames.insert(pr[i].frame);
  }
  return ix;
}

/// TP pairs over all frames as record indices (gt, pr), in frame order.
inline std::vector<std::pair<std::size_t, std::size_t>> match_sequence(std::span<const TrackRecord> gt,
                                                                       std::span<const TrackRecord> pr,
                                                                       const FrameIndex& ix, double alpha) {
  std::vector<std::pair<std::size_t, std::size_t>> tps;
  static const std::vector<std::size_t> none;
  for (int f : ix.frames) {
    const auto git = ix.gt.find(f);
    const auto pit = ix.pr.find(f);
    const auto& gi = git == ix.gt.end() ? none : git->second;
    const auto& pi = pit == ix.pr.end() ? none : pit->second;
    std::vector<BoundingBox> gb, pb;
    for (auto i : gi) gb.push_back(gt[i].box);
    for (auto i : pi) pb.push_back(pr[i].box);
    for (const auto& [a, b] : match_boxes(gb, pb, alpha).tp) tps.emplace_back(gi[a], pi[b]);
  }
  return tps;
}

}  // namespace detail

/// Matches the records of one frame. Indices in the result refer to `gt`/`pr`.
inline FrameMatch match_frame(std::span<const TrackRecord> gt, std::span<const TrackRecord> pr, int frame,
                              double alpha) {
  std::vector<std::size_t> gi, pi;
  std::vector<BoundingBox> gb, pb;
  for (std::size_t i = 0; i < gt.size(); ++i)
    if (gt[i].frame == frame) {
      gi.push_back(i);
      gb.push_back(gt[i].box);
    }
  for (std::size_t i = 0; i < pr.size(); ++i)
    if (pr[i].frame == frame) {
      pi.push_back(i);
      pb.push_back(pr[i].box);
    }
  FrameMatch local = detail::match_boxes(gb, pb, alpha);
  FrameMatch out;
  for (const auto& [a, b] : local.tp) out.tp.emplace_back(gi[a], pi[b]);
  for (auto a : local.fn) out.fn.push_back(gi[a]);
  for (auto b : local.fp) out.fp.push_back(pi[b]);
  return out;
}

struct MotScore {
  std::optional<double> mota;
  std::optional<double> idf1;
  double hota = 0.0;
  double deta = 0.0;
  double assa = 0.0;
  bool degenerate = false;  // no gt and no predictions

  std::size_t gt_dets = 0, pr_dets = 0;
  std::size_t tp = 0, fn = 0, fp = 0, idsw = 0;  // at the MOTA alpha
  std::size_t idtp = 0, idfn = 0, idfp = 0;
};

struct MotaResult {
  std::optional<double> mota;
  std::size_t tp = 0, fn = 0, fp = 0, idsw = 0, gt_dets = 0;
};

/// MOTA = 1 - (FN + FP + IDSW) / |gtDet|. An IDSW is a TP whose prID differs
/// from that of the previous TP with the same gtID.
inline MotaResult mota(std::span<const TrackRecord> gt, std::span<const TrackRecord> pr, double alpha = 0.5) {
  validate_tracks(gt, "mota gt");
  validate_tracks(pr, "mota pr");
  MotaResult r;
  r.gt_dets = gt.size();
  const auto ix = detail::index_frames(gt, pr);
  const auto tps = detail::match_sequence(gt, pr, ix, alpha);
  r.tp = tps.size();
  r.fn = gt.size() - r.tp;
  r.fp = pr.size() - r.tp;
  std::map<int, int> last_pr;  // gt id -> pr id of its previous TP
  for (const auto& [g, p] : tps) {
    auto [it, inserted] = last_pr.try_emplace(gt[g].id, pr[p].id);
    if (!inserted) {
      if (it->second != pr[p].id) ++r.idsw;
      it->second = pr[p].id;
    }
  }
  if (r.gt_dets > 0)
    r.mota = 1.0 - static_cast<double>(r.fn + r.fp + r.idsw) / static_cast<double>(r.gt_dets);
  return r;
}

struct Idf1Result {
  std::optional<double> idf1;
  std::size_t idtp = 0, idfn = 0, idfp = 0;
  std::map<int, int> mapping;  // gt id -> pr id
};

/// IDF1 over the trajectory bijection maximizing IDTP, where IDTP(g, p) is
/// the number of frames both are present with IoU >= alpha.
inline Idf1Result idf1(std::span<const TrackRecord> gt, std::span<const TrackRecord> pr, double alpha = 0.5) {
  validate_tracks(gt, "idf1 gt");
  validate_tracks(pr, "idf1 pr");
  Idf1Result r;
  std::map<int, int> gslot, pslot;
  for (const auto& t : gt) gslot.try_emplace(t.id, static_cast<int>(gslot.size()));
  for (const auto& t : pr) pslot.try_emplace(t.id, static_cast<int>(pslot.size()));
  Eigen::MatrixXd overlap = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(gslot.size()),
                                                  static_cast<Eigen::Index>(pslot.size()));
  std::map<std::pair<int, int>, const BoundingBox*> pr_at;  // (frame, pr id) -> box
  for (const auto& t : pr) pr_at[{t.frame, t.id}] = &t.box;
  for (const auto& g : gt)
    for (const auto& [pid, slot] : pslot) {
      const auto it = pr_at.find({g.frame, pid});
      if (it != pr_at.end() && iou_3d(g.box, *it->second) >= alpha) overlap(gslot[g.id], slot) += 1.0;
    }
  const auto assign = max_weight_assignment(overlap);
  std::vector<int> pid_of(pslot.size());
  for (const auto& [pid, slot] : pslot) pid_of[static_cast<std::size_t>(slot)] = pid;
  for (const auto& [gid, slot] : gslot) {
    const int j = assign[static_cast<std::size_t>(slot)];
    if (j < 0 || overlap(slot, j) <= 0.0) continue;
    r.idtp += static_cast<std::size_t>(overlap(slot, j));
    r.mapping[gid] = pid_of[static_cast<std::size_t>(j)];
  }
  r.idfn = gt.size() - r.idtp;
  r.idfp = pr.size() - r.idtp;
  if (!gt.empty())
    r.idf1 = static_cast<double>(r.idtp) /
             (static_cast<double>(r.idtp) + 0.5 * static_cast<double>(r.idfn) + 0.5 * static_cast<double>(r.idfp));
  return r;
}

inline std::vector<double> hota_alphas() {
  std::vector<double> a;
  for (int k = 1; k <= 19; ++k) a.push_back(0.05 * k);
  return a;
}

struct HotaResult {
  double hota = 0.0, deta = 0.0, assa = 0.0;
  std::vector<double> hota_alpha, deta_alpha, assa_alpha;  // per alpha on the grid
  bool degenerate = false;
};

/**
 * HOTA averaged over alpha = 0.05 .. 0.95. At each alpha:
 * DetA = TP / (TP + FN + FP), AssA = mean over TPs c of
 * TPA(c) / (TPA(c) + FNA(c) + FPA(c)), HOTA = sqrt(DetA * AssA).
 */
inline HotaResult hota(std::span<const TrackRecord> gt, std::span<const TrackRecord> pr) {
  validate_tracks(gt, "hota gt");
  validate_tracks(pr, "hota pr");
  HotaResult r;
  if (gt.empty() && pr.empty()) {
    r.hota = r.deta = r.assa = 1.0;
    r.degenerate = true;
    return r;
  }
  std::map<int, std::size_t> gt_count, pr_count;
  for (const auto& t : gt) ++gt_count[t.id];
  for (const auto& t : pr) ++pr_count[t.id];
  const auto ix = detail::index_frames(gt, pr);
  for (double alpha : hota_alphas()) {
    const auto tps = detail::match_sequence(gt, pr, ix, alpha);
    const double tp = static_cast<double>(tps.size());
    const double fn = static_cast<double>(gt.size()) - tp;
    const double fp = static_cast<double>(pr.size()) - tp;
    const double deta = tp / (tp + fn + fp);
    std::map<std::pair<int, int>, std::size_t> pair_count;
    for (const auto& [g, p] : tps) ++pair_count[{gt[g].id, pr[p].id}];
    double ass_sum = 0.0;
    for (const auto& [g, p] : tps) {
      const double tpa = static_cast<double>(pair_count[{gt[g].id, pr[p].id}]);
      const double fna = static_cast<double>(gt_count[gt[g].id]) - tpa;
      const double fpa = static_cast<double>(pr_count[pr[p].id]) - tpa;
      ass_sum += tpa / (tpa + fna + fpa);
    }
    const double assa = tps.empty() ? 0.0 : ass_sum / tp;
    r.deta_alpha.push_back(deta);
    r.assa_alpha.push_back(assa);
    r.hota_alpha.push_back(std::sqrt(deta * assa));
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  r.hota = mean(r.hota_alpha);
  r.deta = mean(r.deta_alpha);
  r.assa = mean(r.assa_alpha);
  return r;
}

/// MOTA and IDF1 at `alpha`, HOTA over the alpha grid.
inline MotScore evaluate_mot(std::span<const TrackRecord> gt, std::span<const TrackRecord> pr, double alpha = 0.5) {
  const auto m = mota(gt, pr, alpha);
  const auto i = idf1(gt, pr, alpha);
  const auto h = hota(gt, pr);
  MotScore s;
  s.mota = m.mota;
  s.idf1 = i.idf1;
  s.hota = h.hota;
  s.deta = h.deta;
  s.assa = h.assa;
  s.degenerate = h.degenerate;
  s.gt_dets = gt.size();
  s.pr_dets = pr.size();
  s.tp = m.tp;
  s.fn = m.fn;
  s.fp = m.fp;
  s.idsw = m.idsw;
  s.idtp = i.idtp;
  s.idfn = i.idfn;
  s.idfp = i.idfp;
  return s;
}

}  // namespace smat

#endif  // SMAT_EVAL_METRICS_HPP
