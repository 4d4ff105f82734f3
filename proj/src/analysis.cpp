#include "aoplab/analysis.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "aoplab/hash.hpp"
#include "aoplab/json_number.hpp"
#include "aoplab/parallel.hpp"

namespace aoplab::analysis {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// ---- statistics ---------------------------------------------------------------

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && x[order[j]] == x[order[i]]) ++j;
    // positions i..j-1 hold ranks i+1..j
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

namespace {

std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  parallel::CompensatedSum sx, sy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx.add(x[i]);
    sy.add(y[i]);
  }
  const double mx = sx.value() / n;
  const double my = sy.value() / n;
  parallel::CompensatedSum sxy, sxx, syy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy.add(dx * dy);
    sxx.add(dx * dx);
    syy.add(dy * dy);
  }
  if (sxx.value() == 0.0 || syy.value() == 0.0) return std::nullopt;
  const double r = sxy.value() / std::sqrt(sxx.value() * syy.value());
  return std::clamp(r, -1.0, 1.0);
}

}  // namespace

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw DataError("spearman: length mismatch (" + std::to_string(x.size()) + " vs " +
                    std::to_string(y.size()) + ")");
  if (x.size() < 3) throw DataError("spearman: needs at least 3 values");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw DataError("spearman: non-finite value");
  }
  return pearson(average_ranks(x), average_ranks(y));
}

std::optional<double> spearman_finite(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("spearman: length mismatch");
  std::vector<double> fx, fy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isfinite(x[i]) && std::isfinite(y[i])) {
      fx.push_back(x[i]);
      fy.push_back(y[i]);
    }
  }
  if (fx.size() < 3) return std::nullopt;
  return spearman(fx, fy);
}

double median(std::vector<double> v) {
  if (v.empty()) throw DataError("median of an empty list");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  if (v.size() % 2) return v[m];
  return v[m - 1] / 2.0 + v[m] / 2.0;
}

const char* to_string(Quadrant q) {
  switch (q) {
    case Quadrant::both_positive:
      return "both_positive";
    case Quadrant::rescued:
      return "rescued";
    case Quadrant::breaks:
      return "breaks";
    case Quadrant::both_nonpositive:
      return "both_nonpositive";
  }
  return "?";
}

Quadrant classify(double iso, double ctx) {
  if (iso > 0.0) return ctx > 0.0 ? Quadrant::both_positive : Quadrant::breaks;
  return ctx > 0.0 ? Quadrant::rescued : Quadrant::both_nonpositive;
}

QuadrantReport quadrant_report(const std::vector<metrics::MetricRecord>& records) {
  if (records.empty()) throw DataError("quadrant report: no records");
  QuadrantReport q;
  q.n = records.size();
  for (const auto& r : records) {
    switch (classify(r.delta_isolated, r.delta_contextual)) {
      case Quadrant::both_positive:
        ++q.both_positive;
        break;
      case Quadrant::rescued:
        ++q.rescued;
        break;
      case Quadrant::breaks:
        ++q.breaks;
        break;
      case Quadrant::both_nonpositive:
        ++q.both_nonpositive;
        break;
    }
    if (r.delta_contextual > r.delta_isolated) ++q.improved;
  }
  return q;
}

ContextRandomReport context_vs_random_report(const std::vector<metrics::MetricRecord>& records) {
  ContextRandomReport out;
  for (const auto& r : records) {
    if (!r.delta_random_expect) {
      ++out.excluded;
      continue;
    }
    ++out.n;
    const bool t = r.c_delta > 0.0;
    const bool rnd = *r.delta_random_expect - r.delta_isolated > 0.0;
    out.true_improves += t;
    out.random_improves += rnd;
    out.true_only += t && !rnd;
  }
  return out;
}

// ---- series -------------------------------------------------------------------

bool natural_less(std::string_view a, std::string_view b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const bool da = std::isdigit(static_cast<unsigned char>(a[i]));
    const bool db = std::isdigit(static_cast<unsigned char>(b[j]));
    if (da && db) {
      std::size_t ie = i, je = j;
      while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
      while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
      auto na = a.substr(i, ie - i);
      auto nb = b.substr(j, je - j);
      while (na.size() > 1 && na[0] == '0') na.remove_prefix(1);
      while (nb.size() > 1 && nb[0] == '0') nb.remove_prefix(1);
      if (na.size() != nb.size()) return na.size() < nb.size();
      if (na != nb) return na < nb;
      i = ie;
      j = je;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  if ((a.size() - i) != (b.size() - j)) return (a.size() - i) < (b.size() - j);
  return a < b;
}

void check_universe(const CheckpointSeries& series) {
  if (series.checkpoints.empty()) throw DataError("checkpoint series is empty");
  std::set<std::string> labels;
  std::set<std::string> reference;
  for (std::size_t c = 0; c < series.checkpoints.size(); ++c) {
    const auto& t = series.checkpoints[c];
    if (!labels.insert(t.label).second) throw DataError("duplicate checkpoint label " + t.label);
    std::set<std::string> ids;
    for (const auto& r : t.records) {
      if (!ids.insert(r.item_id).second)
        throw DataError("checkpoint " + t.label + ": duplicate item_id " + r.item_id);
    }
    if (ids.empty()) throw DataError("checkpoint " + t.label + " has no records");
    if (c == 0)
      reference = std::move(ids);
    else if (ids != reference)
      throw DataError("checkpoint " + t.label + " covers different items than " +
                      series.checkpoints[0].label);
  }
}

CheckpointSeries load_series(const fs::path& path) {
  CheckpointSeries series;
  if (fs::is_regular_file(path)) {
    series.checkpoints.push_back({path.stem().string(), metrics::read_jsonl(path)});
    check_universe(series);
    return series;
  }
  if (!fs::is_directory(path)) throw DataError("metrics path not found: " + path.string());
  std::vector<std::string> labels;
  const auto order = path / kCheckpointOrderFile;
  if (fs::exists(order)) {
    std::ifstream in(order);
    std::string line;
    while (std::getline(in, line)) {
      const auto label = text::trim(line);
      if (!label.empty() && label[0] != '#') labels.emplace_back(label);
    }
  } else {
    for (const auto& e : fs::directory_iterator(path)) {
      if (e.is_regular_file() && e.path().extension() == ".jsonl") labels.push_back(e.path().stem().string());
    }
    std::sort(labels.begin(), labels.end(), natural_less);
  }
  if (labels.empty()) throw DataError("no metric tables under " + path.string());
  for (const auto& label : labels) {
    const auto file = path / (label + ".jsonl");
    if (!fs::is_regular_file(file)) throw DataError("missing metric table " + file.string());
    series.checkpoints.push_back({label, metrics::read_jsonl(file)});
  }
  check_universe(series);
  return series;
}

namespace {

struct Aligned {
  std::vector<double> iso, ctx;
};

Aligned align(const CheckpointTable& t, const std::vector<std::string>& ids) {
  std::unordered_map<std::string, const metrics::MetricRecord*> by_id;
  for (const auto& r : t.records) by_id[r.item_id] = &r;
  Aligned a;
  for (const auto& id : ids) {
    const auto* r = by_id.at(id);
    a.iso.push_back(r->delta_isolated);
    a.ctx.push_back(r->delta_contextual);
  }
  return a;
}

std::vector<std::string> sorted_ids(const CheckpointTable& t) {
  std::vector<std::string> ids;
  for (const auto& r : t.records) ids.push_back(r.item_id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

double mean(const std::vector<double>& v) {
  parallel::CompensatedSum s;
  for (double x : v) s.add(x);
  return s.value() / static_cast<double>(v.size());
}

SettingStats setting_stats(const std::vector<double>& d, const std::vector<double>& final_d,
                           const std::vector<double>* signal) {
  SettingStats s;
  s.aop_percent = metrics::aop_percent(d);
  s.mean_delta = mean(d);
  s.median_delta = median(d);
  s.rho_vs_final = spearman_finite(d, final_d);
  if (signal) s.rho_vs_counts = spearman_finite(d, *signal);
  return s;
}

}  // namespace

std::vector<PhaseRow> phase_summary(const CheckpointSeries& series, const std::map<std::string, double>* count_signal) {
  if (series.checkpoints.size() < 2) throw DataError("phase summary needs at least 2 checkpoints");
  check_universe(series);
  const auto ids = sorted_ids(series.checkpoints.back());
  std::vector<double> signal;
  if (count_signal) {
    for (const auto& id : ids) {
      auto it = count_signal->find(id);
      if (it == count_signal->end()) throw DataError("count signal is missing item " + id);
      signal.push_back(it->second);
    }
  }
  const auto final_a = align(series.checkpoints.back(), ids);
  std::vector<PhaseRow> rows(series.checkpoints.size());
  parallel::for_each_index(rows.size(), 0, [&](std::size_t c) {
    const auto a = align(series.checkpoints[c], ids);
    rows[c].checkpoint = series.checkpoints[c].label;
    rows[c].isolated = setting_stats(a.iso, final_a.iso, count_signal ? &signal : nullptr);
    rows[c].contextual = setting_stats(a.ctx, final_a.ctx, count_signal ? &signal : nullptr);
  });
  return rows;
}

SplitTable read_splits_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open splits file " + path.string());
  ojson j;
  try {
    j = ojson::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw DataError(path.string() + ": expected an object keyed by checkpoint");
  SplitTable t;
  static const char* kBuckets[] = {"unseen", "once", "few", "many", "excluded"};
  for (const auto& [ckpt, row] : j.items()) {
    t.checkpoints.push_back(ckpt);
    for (const char* b : kBuckets) {
      if (!row.contains(b) || !row[b].is_array())
        throw DataError(path.string() + ": checkpoint " + ckpt + " lacks bucket " + b);
      t.buckets[ckpt][b] = row[b].get<std::vector<std::string>>();
    }
  }
  return t;
}

// ---- report -------------------------------------------------------------------

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

class Csv {
 public:
  explicit Csv(std::initializer_list<const char*> header) {
    std::vector<std::string> h(header.begin(), header.end());
    row(h);
  }
  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << csv_field(fields[i]);
    }
    out_ << '\n';
  }
  [[nodiscard]] std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

void write_file(const fs::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << data;
  if (!out) throw DataError("cannot write " + path.string());
}

ojson accuracy_json(std::size_t correct, std::size_t n, std::size_t total) {
  ojson j;
  j["accuracy"] = n ? json_number(static_cast<double>(correct) / static_cast<double>(n)) : ojson(nullptr);
  j["coverage"] = json_number(static_cast<double>(n) / static_cast<double>(total));
  j["n"] = n;
  return j;
}

}  // namespace

ReportResult emit_report(const ReportInputs& in, const fs::path& out_dir) {
  check_universe(in.series);
  const auto& final_table = in.series.checkpoints.back();
  const auto& records = final_table.records;
  const auto ids = sorted_ids(final_table);

  std::unordered_map<std::string, const cap::CapItem*> items;
  for (const auto& item : in.corpus) items[item.item_id] = &item;
  if (in.counts || in.predictors) {
    for (const auto& id : ids) {
      if (!items.count(id)) throw DataError("report: item " + id + " is in the metrics but not in the CAP corpus");
    }
  }

  fs::create_directories(out_dir);
  ReportResult result;
  std::map<std::string, std::string> files;  // name -> content

  std::unordered_map<std::string, const metrics::MetricRecord*> rec_by_id;
  for (const auto& r : records) rec_by_id[r.item_id] = &r;

  ojson summary;
  summary["n_items"] = ids.size();
  summary["checkpoints"] = ojson::array();
  for (const auto& t : in.series.checkpoints) summary["checkpoints"].push_back(t.label);
  summary["final_checkpoint"] = final_table.label;
  summary["metrics"] = ojson::parse(metrics::summary_json(metrics::summarize(records)));

  // relative counts per item and order
  std::array<std::map<std::string, ngram::RelativeCount>, 3> rel;
  if (in.counts) {
    for (const auto& id : ids) {
      for (int n = 1; n <= 3; ++n)
        rel[static_cast<std::size_t>(n - 1)][id] = ngram::relative_count(*in.counts, *items.at(id), n, in.normalize);
    }
    Csv csv({"item_id", "n", "count_natural", "count_swapped", "log_diff", "raw_sign", "delta_isolated",
             "delta_contextual"});
    for (const auto& id : ids) {
      const auto* r = rec_by_id.at(id);
      for (int n = 1; n <= 3; ++n) {
        const auto& rc = rel[static_cast<std::size_t>(n - 1)].at(id);
        csv.row({id, std::to_string(n), std::to_string(rc.natural), std::to_string(rc.swapped), num(rc.log_diff),
                 std::to_string(rc.raw_sign), num(r->delta_isolated), num(r->delta_contextual)});
      }
    }
    files["aop_vs_counts.csv"] = csv.str();
  } else {
    result.omitted["aop_vs_counts"] = "no counts table";
    result.omitted["count_correlations"] = "no counts table";
  }

  // learning curves
  if (in.series.checkpoints.size() >= 2) {
    std::map<std::string, double> signal;
    if (in.counts) {
      for (const auto& [id, rc] : rel[1]) signal[id] = rc.log_diff;
    }
    const auto rows = phase_summary(in.series, in.counts ? &signal : nullptr);
    Csv csv({"checkpoint", "setting", "aop_percent", "mean_delta", "median_delta", "rho_vs_final", "rho_vs_counts"});
    for (const auto& row : rows) {
      for (const auto* setting : {"isolated", "contextual"}) {
        const auto& s = std::string(setting) == "isolated" ? row.isolated : row.contextual;
        csv.row({row.checkpoint, setting, num(s.aop_percent), num(s.mean_delta), num(s.median_delta),
                 num(s.rho_vs_final), num(s.rho_vs_counts)});
      }
    }
    files["learning_curves.csv"] = csv.str();
  } else {
    result.omitted["learning_curves"] = "needs at least 2 checkpoints";
  }

  // token profile
  {
    Csv csv({"setting", "order", "position", "logprob", "included", "excluded"});
    bool any = false;
    for (auto setting : {metrics::Setting::isolated, metrics::Setting::contextual}) {
      try {
        const auto p = metrics::profile_from_records(records, setting);
        any = true;
        auto emit = [&](const char* order, const metrics::PositionScores& s) {
          const std::array<std::pair<const char*, double>, 3> cells{
              {{"first_adj", s.first_adj}, {"second_adj", s.second_adj}, {"noun", s.noun}}};
          for (const auto& [pos, v] : cells)
            csv.row({metrics::to_string(setting), order, pos, num(v), std::to_string(p.included),
                     std::to_string(p.excluded)});
        };
        emit("natural", p.natural);
        emit("swapped", p.swapped);
        emit("difference", p.difference);
      } catch (const DataError&) {
        // every item excluded in this setting
      }
    }
    if (any)
      files["token_profile.csv"] = csv.str();
    else
      result.omitted["token_profile"] = "no item has a per-position profile";
  }

  // exposure curves
  if (in.splits) {
    std::map<std::string, const CheckpointTable*> by_label;
    for (const auto& t : in.series.checkpoints) by_label[t.label] = &t;
    Csv csv({"split_checkpoint", "bucket", "size", "aop_percent_contextual", "aop_percent_isolated",
             "metrics_checkpoint"});
    for (const auto& ckpt : in.splits->checkpoints) {
      const auto it = by_label.find(ckpt);
      const CheckpointTable& table = it != by_label.end() ? *it->second : final_table;
      std::unordered_map<std::string, const metrics::MetricRecord*> recs;
      for (const auto& r : table.records) recs[r.item_id] = &r;
      for (const auto* bucket : {"unseen", "once", "few", "many", "excluded"}) {
        const auto& members = in.splits->buckets.at(ckpt).at(bucket);
        std::vector<double> iso, ctx;
        for (const auto& id : members) {
          const auto r = recs.find(id);
          if (r == recs.end()) throw DataError("splits mention item " + id + " missing from the metrics");
          iso.push_back(r->second->delta_isolated);
          ctx.push_back(r->second->delta_contextual);
        }
        csv.row({ckpt, bucket, std::to_string(members.size()),
                 ctx.empty() ? std::string() : num(metrics::aop_percent(ctx)),
                 iso.empty() ? std::string() : num(metrics::aop_percent(iso)), table.label});
      }
    }
    files["exposure_curves.csv"] = csv.str();
  } else {
    result.omitted["exposure_curves"] = "no exposure splits";
  }

  // quadrants and random contexts
  {
    const auto q = quadrant_report(records);
    if (q.both_positive + q.rescued + q.breaks + q.both_nonpositive != q.n)
      throw DataError("quadrant counts do not partition the items");
    Csv csv({"item_id", "delta_isolated", "delta_contextual", "c_delta", "delta_random_expect", "quadrant",
             "improved"});
    for (const auto& id : ids) {
      const auto* r = rec_by_id.at(id);
      csv.row({id, num(r->delta_isolated), num(r->delta_contextual), num(r->c_delta), num(r->delta_random_expect),
               to_string(classify(r->delta_isolated, r->delta_contextual)),
               r->delta_contextual > r->delta_isolated ? "1" : "0"});
    }
    files["context_quadrants.csv"] = csv.str();
    ojson qj;
    qj["n"] = q.n;
    for (const auto& [name, c] : std::vector<std::pair<const char*, std::size_t>>{
             {"both_positive", q.both_positive},
             {"rescued", q.rescued},
             {"breaks", q.breaks},
             {"both_nonpositive", q.both_nonpositive},
             {"improved", q.improved}}) {
      qj[name] = {{"count", c}, {"fraction", json_number(q.fraction(c))}};
    }
    summary["quadrants"] = qj;
    const auto cr = context_vs_random_report(records);
    if (cr.n > 0) {
      ojson rj;
      rj["n"] = cr.n;
      rj["excluded"] = cr.excluded;
      rj["true_improves"] = json_number(cr.fraction(cr.true_improves));
      rj["random_improves"] = json_number(cr.fraction(cr.random_improves));
      rj["true_only"] = json_number(cr.fraction(cr.true_only));
      summary["context_vs_random"] = rj;
    } else {
      result.omitted["context_vs_random"] = "no random-context expectations";
    }
  }

  // count correlations across checkpoints
  if (in.counts) {
    Csv csv({"checkpoint", "setting", "n", "rho"});
    for (const auto& t : in.series.checkpoints) {
      const auto a = align(t, ids);
      for (int n = 1; n <= 3; ++n) {
        std::vector<double> sig;
        for (const auto& id : ids) sig.push_back(rel[static_cast<std::size_t>(n - 1)].at(id).log_diff);
        csv.row({t.label, "isolated", std::to_string(n), num(spearman_finite(a.iso, sig))});
        csv.row({t.label, "contextual", std::to_string(n), num(spearman_finite(a.ctx, sig))});
      }
    }
    files["count_correlations.csv"] = csv.str();
  }

  // accuracy table
  {
    const auto final_a = align(final_table, ids);
    ojson acc;
    auto positive = [](const std::vector<double>& v) {
      return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](double d) { return d > 0.0; }));
    };
    acc["aop_delta_isolated"] = accuracy_json(positive(final_a.iso), ids.size(), ids.size());
    acc["aop_delta_contextual"] = accuracy_json(positive(final_a.ctx), ids.size(), ids.size());
    auto with_rho = [&](ojson row, const std::vector<std::optional<double>>& scores) {
      std::vector<double> s, iso, ctx;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        if (!scores[i]) continue;
        s.push_back(*scores[i]);
        iso.push_back(final_a.iso[i]);
        ctx.push_back(final_a.ctx[i]);
      }
      row["rho_vs_delta_isolated"] = json_number(spearman_finite(s, iso));
      row["rho_vs_delta_contextual"] = json_number(spearman_finite(s, ctx));
      return row;
    };
    if (in.predictors) {
      std::unordered_map<std::string, const predictors::ItemScores*> ps;
      for (const auto& s : *in.predictors) ps[s.item_id] = &s;
      std::vector<std::optional<double>> len, pmi, subj;
      for (const auto& id : ids) {
        const auto it = ps.find(id);
        if (it == ps.end()) throw DataError("predictor table is missing item " + id);
        len.emplace_back(it->second->length);
        pmi.push_back(it->second->pmi);
        subj.push_back(it->second->subjectivity);
      }
      auto table_row = [&](const std::vector<std::optional<double>>& v) {
        std::size_t n = 0, correct = 0;
        for (const auto& x : v) {
          if (!x) continue;
          ++n;
          correct += *x > 0.0;
        }
        return with_rho(accuracy_json(correct, n, ids.size()), v);
      };
      acc["length"] = table_row(len);
      acc["pmi"] = table_row(pmi);
      acc["subjectivity"] = table_row(subj);

      std::map<std::string, std::set<std::string>> correct{
          {"length", {}}, {"pmi", {}}, {"subjectivity", {}}, {"aop_delta_contextual", {}}};
      std::set<std::string> universe;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        if (!pmi[i] || !subj[i]) continue;
        universe.insert(ids[i]);
        if (*len[i] > 0) correct["length"].insert(ids[i]);
        if (*pmi[i] > 0) correct["pmi"].insert(ids[i]);
        if (*subj[i] > 0) correct["subjectivity"].insert(ids[i]);
        if (final_a.ctx[i] > 0) correct["aop_delta_contextual"].insert(ids[i]);
      }
      const auto part = predictors::overlap_partition(correct, universe);
      ojson ov;
      ov["universe"] = universe.size();
      ov["union_coverage"] = json_number(part.union_coverage);
      ov["regions"] = ojson::array();
      for (const auto& r : part.regions) ov["regions"].push_back({{"members", r.members}, {"count", r.count}});
      summary["overlap"] = ov;
    } else {
      result.omitted["predictors"] = "no predictor table";
    }
    if (in.counts) {
      for (int n = 1; n <= 3; ++n) {
        std::vector<std::optional<double>> v;
        std::size_t correct = 0;
        for (const auto& id : ids) {
          const auto& rc = rel[static_cast<std::size_t>(n - 1)].at(id);
          v.emplace_back(rc.log_diff);
          correct += rc.raw_sign > 0;
        }
        acc["relative_count_n" + std::to_string(n)] = with_rho(accuracy_json(correct, ids.size(), ids.size()), v);
      }
    }
    summary["accuracy"] = acc;
  }

  summary["omitted"] = result.omitted;
  files["summary.json"] = summary.dump(2) + "\n";

  ojson manifest;
  manifest["tool_version"] = kToolVersion;
  manifest["files"] = ojson::object();
  for (const auto& [name, data] : files) {
    write_file(out_dir / name, data);
    manifest["files"][name] = hash::sha256_hex(data);
    result.files.push_back(name);
  }
  manifest["omitted"] = result.omitted;
  write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  result.files.push_back("manifest.json");
  std::sort(result.files.begin(), result.files.end());
  return result;
}

}  // namespace aoplab::analysis
