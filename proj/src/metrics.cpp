#include "bda/metrics.hpp"

#include <cmath>
#include <cstdio>
#include "json.hpp"

#include "bda/errors.hpp"

namespace bda {

void ConfusionMatrix::accumulate(const Mask& pred_loc, const Mask& pred_dmg,
                                 const MaskPair& gt) {
  const auto same = [](const Mask& a, const Mask& b) {
    return a.height == b.height && a.width == b.width;
  };
  if (!same(pred_loc, gt.loc) || !same(pred_dmg, gt.dmg) || !same(gt.loc, gt.dmg)) {
    throw ContractError("accumulate: prediction and ground-truth shapes differ");
  }
  for (std::size_t i = 0; i < gt.loc.size(); ++i) {
    const std::uint8_t pl = pred_loc.values[i], tl = gt.loc.values[i];
    const std::uint8_t pd = pred_dmg.values[i], td = gt.dmg.values[i];
    if (pl > 1 || tl > 1 || pd > kMaxDamageValue || td > kMaxDamageValue) {
      throw ContractError("accumulate: mask value out of range at pixel " +
                          std::to_string(i));
    }
    if (tl && pl) {
      ++loc_tp;
    } else if (!tl && pl) {
      ++loc_fp;
    } else if (tl && !pl) {
      ++loc_fn;
    } else {
      ++loc_tn;
    }
    if (td > 0) ++dmg[td - 1][pd];
  }
}

ConfusionMatrix& ConfusionMatrix::merge(const ConfusionMatrix& o) {
  loc_tp += o.loc_tp;
  loc_fp += o.loc_fp;
  loc_fn += o.loc_fn;
  loc_tn += o.loc_tn;
  for (std::size_t r = 0; r < kDamageClasses; ++r) {
    for (std::size_t c = 0; c <= kMaxDamageValue; ++c) dmg[r][c] += o.dmg[r][c];
  }
  return *this;
}

std::uint64_t ConfusionMatrix::building_pixels() const {
  std::uint64_t n = 0;
  for (const auto& row : dmg) {
    for (auto v : row) n += v;
  }
  return n;
}

double f1_score(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
  const std::uint64_t denom = 2 * tp + fp + fn;
  if (denom == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

ScoreReport compute_scores(const ConfusionMatrix& cm, std::size_t samples) {
  ScoreReport r;
  r.samples = samples;
  r.f1_loc = f1_score(cm.loc_tp, cm.loc_fp, cm.loc_fn);
  double inv_sum = 0.0;
  bool any_zero = false;
  for (std::size_t k = 0; k < kDamageClasses; ++k) {
    const std::uint64_t tp = cm.dmg[k][k + 1];
    std::uint64_t fn = 0, fp = 0;
    for (std::size_t c = 0; c <= kMaxDamageValue; ++c) {
      if (c != k + 1) fn += cm.dmg[k][c];
    }
    for (std::size_t t = 0; t < kDamageClasses; ++t) {
      if (t != k) fp += cm.dmg[t][k + 1];
    }
    r.f1_levels[k] = f1_score(tp, fp, fn);
    if (r.f1_levels[k] == 0.0) {
      any_zero = true;
    } else {
      inv_sum += 1.0 / r.f1_levels[k];
    }
  }
  r.f1_clf = any_zero ? 0.0 : static_cast<double>(kDamageClasses) / inv_sum;
  r.f1_oa = kLocWeight * r.f1_loc + kClfWeight * r.f1_clf;
  return r;
}

std::string percent4(double fraction) {
  char buf[32];
  double v = fraction * 100.0;
  if (v == 0.0) v = 0.0;  // no "-0.0000"
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string serialize_report(const ScoreReport& r) {
  nlohmann::ordered_json j;
  j["f1_loc"] = percent4(r.f1_loc);
  j["f1_clf"] = percent4(r.f1_clf);
  j["f1_oa"] = percent4(r.f1_oa);
  for (std::size_t k = 0; k < kDamageClasses; ++k) {
    j["f1_l" + std::to_string(k + 1)] = percent4(r.f1_levels[k]);
  }
  j["samples"] = r.samples;
  j["variant"] = r.variant;
  j["dataset"] = r.dataset;
  return j.dump();
}

ScoreReport parse_report(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    auto pct = [&](const char* key) { return std::stod(j.at(key).get<std::string>()) / 100.0; };
    ScoreReport r;
    r.f1_loc = pct("f1_loc");
    r.f1_clf = pct("f1_clf");
    r.f1_oa = pct("f1_oa");
    for (std::size_t k = 0; k < kDamageClasses; ++k) {
      r.f1_levels[k] = pct(("f1_l" + std::to_string(k + 1)).c_str());
    }
    r.samples = j.at("samples").get<std::size_t>();
    r.variant = j.at("variant").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    return r;
  } catch (const std::exception& e) {
    throw ParseError(std::string("score report: ") + e.what());
  }
}

std::string report_csv_header() {
  return "variant,dataset,samples,f1_loc,f1_clf,f1_oa,f1_l1,f1_l2,f1_l3,f1_l4";
}

std::string report_csv_row(const ScoreReport& r) {
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  };
  std::string row = quote(r.variant) + "," + quote(r.dataset) + "," +
                    std::to_string(r.samples) + "," + percent4(r.f1_loc) + "," +
                    percent4(r.f1_clf) + "," + percent4(r.f1_oa);
  for (double f : r.f1_levels) row += "," + percent4(f);
  return row;
}

}  // namespace bda
