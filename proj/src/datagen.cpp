#include "l20mc/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace l20mc {

Vec scheme_probs(Index n, SchemeKind kind) {
  if (kind == SchemeKind::kUniform) {
    if (n < 1) throw validation_error("scheme_probs: n must be positive");
    Vec p(n);
    p.setConstant(1.0 / static_cast<double>(n));
    return p;
  }
  if (n < 10) throw validation_error("scheme_probs: banded schemes need n >= 10");
  Vec p(n);
  const double lo = kind == SchemeKind::kScheme1 ? 2.0 : 3.0;
  const double hi = kind == SchemeKind::kScheme1 ? 4.0 : 9.0;
  const Index b1 = n / 10;
  const Index b2 = n / 5;
  double total = 0.0;
  for (Index k = 0; k < n; ++k) {
    const double w = k < b1 ? lo : (k < b2 ? hi : 1.0);
    p(k) = w;
    total += w;
  }
  p /= total;
  return p;
}

namespace {

// inverse-CDF sampler over a fixed probability vector
struct CdfSampler {
  std::vector<double> cdf;

  explicit CdfSampler(const Vec& p) : cdf(static_cast<std::size_t>(p.size())) {
    double acc = 0.0;
    for (Index i = 0; i < p.size(); ++i) {
      acc += p(i);
      cdf[static_cast<std::size_t>(i)] = acc;
    }
    cdf.back() = 1.0;
  }

  Index draw(double u) const {
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return static_cast<Index>(std::min<std::size_t>(
        static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1));
  }
};

}  // namespace

std::vector<std::pair<Index, Index>> sample_omega(Index n, Index m, double sr,
                                                  SchemeKind scheme, std::uint64_t seed) {
  if (!(sr > 0.0 && sr < 1.0)) throw validation_error("sample_omega: sr must lie in (0,1)");
  const double total = static_cast<double>(n) * static_cast<double>(m);
  const auto target = static_cast<std::size_t>(std::ceil(sr * total));
  if (target > static_cast<std::size_t>(total)) throw validation_error("sample_omega: target exceeds n*m");

  SamplingScheme sch(n, m, scheme);
  CdfSampler rows(sch.row_probs);
  CdfSampler cols(sch.col_probs);
  Rng rng(seed, RngStream::kOmega);

  std::unordered_set<std::uint64_t> seen;
  seen.reserve(target * 2);
  std::vector<std::pair<Index, Index>> omega;
  omega.reserve(target);
  while (omega.size() < target) {
    const Index i = rows.draw(rng.uniform());
    const Index j = cols.draw(rng.uniform());
    const std::uint64_t key = static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(m) +
                              static_cast<std::uint64_t>(j);
    if (seen.insert(key).second) omega.emplace_back(i, j);
  }
  std::sort(omega.begin(), omega.end());
  return omega;
}

GroundTruth make_ground_truth(Index n, Index m, Index r_star, std::uint64_t seed) {
  if (n <= 0 || m <= 0 || r_star <= 0) throw validation_error("ground truth: dimensions must be positive");
  Rng rng(seed, RngStream::kFactors);
  GroundTruth gt;
  gt.seed = seed;
  gt.m_left.resize(n, r_star);
  gt.m_right.resize(m, r_star);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < r_star; ++j) gt.m_left(i, j) = rng.normal();
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < r_star; ++j) gt.m_right(i, j) = rng.normal();
  return gt;
}

ObservationSet observe(const GroundTruth& truth, const std::vector<std::pair<Index, Index>>& omega,
                       double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw validation_error("observe: sigma must be nonnegative");
  if (omega.empty()) throw validation_error("observe: empty index set");
  const Index n = truth.m_left.rows();
  const Index m = truth.m_right.rows();
  std::vector<double> clean(omega.size());
  double clean_sq = 0.0;
  for (std::size_t t = 0; t < omega.size(); ++t) {
    clean[t] = truth.entry(omega[t].first, omega[t].second);
    clean_sq += clean[t] * clean[t];
  }
  std::vector<Entry> entries(omega.size());
  if (sigma == 0.0) {
    for (std::size_t t = 0; t < omega.size(); ++t)
      entries[t] = Entry{omega[t].first, omega[t].second, clean[t]};
  } else {
    Rng rng(seed, RngStream::kNoise);
    std::vector<double> xi(omega.size());
    double xi_sq = 0.0;
    for (std::size_t t = 0; t < omega.size(); ++t) {
      xi[t] = rng.normal();
      xi_sq += xi[t] * xi[t];
    }
    const double scale = sigma * std::sqrt(clean_sq) / std::sqrt(xi_sq);
    for (std::size_t t = 0; t < omega.size(); ++t)
      entries[t] = Entry{omega[t].first, omega[t].second, clean[t] + scale * xi[t]};
  }
  return ObservationSet(n, m, std::move(entries));
}

namespace {

std::vector<Index> pick_distinct(Index total, Index count, Rng& rng) {
  std::vector<Index> ids(static_cast<std::size_t>(total));
  std::iota(ids.begin(), ids.end(), Index{0});
  for (Index i = 0; i < count; ++i) {
    const Index j = i + static_cast<Index>(rng.uniform() * static_cast<double>(total - i));
    std::swap(ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(std::min(j, total - 1))]);
  }
  ids.resize(static_cast<std::size_t>(count));
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace

TripletSplit load_triplets(const std::string& path, const TripletOptions& options) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);

  std::map<std::pair<Index, Index>, double> support;
  Index max_user = -1, max_item = -1;
  Index min_user = std::numeric_limits<Index>::max();
  Index min_item = std::numeric_limits<Index>::max();
  double v_min = std::numeric_limits<double>::infinity();
  double v_max = -std::numeric_limits<double>::infinity();

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string_view sv(line);
    const auto hash = sv.find('#');
    if (hash != std::string_view::npos) sv = sv.substr(0, hash);
    bool blank = true;
    for (char c : sv)
      if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
    if (blank) continue;

    std::string normalized(sv);
    if (options.delimiter != '\0')
      std::replace(normalized.begin(), normalized.end(), options.delimiter, ' ');
    std::istringstream ls(normalized);
    long long user = 0, item = 0;
    double rating = 0.0;
    if (!(ls >> user >> item >> rating) || user < 0 || item < 0 || !std::isfinite(rating))
      throw validation_error("triplet file: malformed line " + std::to_string(lineno));

    const Index u = static_cast<Index>(user);
    const Index it = static_cast<Index>(item);
    support.emplace(std::make_pair(u, it), rating);  // first occurrence wins
    max_user = std::max(max_user, u);
    max_item = std::max(max_item, it);
    min_user = std::min(min_user, u);
    min_item = std::min(min_item, it);
    v_min = std::min(v_min, rating);
    v_max = std::max(v_max, rating);
  }
  if (support.empty()) throw validation_error("triplet file: no ratings found");

  // 1-based ids are detected from the minimum observed index
  const Index base = (min_user >= 1 && min_item >= 1) ? 1 : 0;
  Index n = max_user - base + 1;
  Index m = max_item - base + 1;

  double r_min = v_min, r_max = v_max;
  if (options.value_range) {
    r_min = options.value_range->first;
    r_max = options.value_range->second;
  }
  if (!(r_max > r_min)) throw validation_error("triplet file: rating range is degenerate");

  std::vector<Entry> all;
  all.reserve(support.size());
  for (const auto& [key, val] : support)
    all.push_back(Entry{key.first - base, key.second - base, val - options.recenter_offset});
  r_min -= options.recenter_offset;
  r_max -= options.recenter_offset;

  // optional row/column subsampling (seeded, ids remapped in sorted order)
  Rng sub_rng(options.seed, RngStream::kSubsample);
  if (options.n_users > 0 && options.n_users < n) {
    std::vector<Index> keep = pick_distinct(n, options.n_users, sub_rng);
    std::vector<Index> remap(static_cast<std::size_t>(n), -1);
    for (std::size_t t = 0; t < keep.size(); ++t) remap[static_cast<std::size_t>(keep[t])] = static_cast<Index>(t);
    std::vector<Entry> filtered;
    for (const Entry& e : all)
      if (remap[static_cast<std::size_t>(e.row)] >= 0)
        filtered.push_back(Entry{remap[static_cast<std::size_t>(e.row)], e.col, e.value});
    all = std::move(filtered);
    n = options.n_users;
  }
  if (options.n_cols > 0 && options.n_cols < m) {
    std::vector<Index> keep = pick_distinct(m, options.n_cols, sub_rng);
    std::vector<Index> remap(static_cast<std::size_t>(m), -1);
    for (std::size_t t = 0; t < keep.size(); ++t) remap[static_cast<std::size_t>(keep[t])] = static_cast<Index>(t);
    std::vector<Entry> filtered;
    for (const Entry& e : all)
      if (remap[static_cast<std::size_t>(e.col)] >= 0)
        filtered.push_back(Entry{e.row, remap[static_cast<std::size_t>(e.col)], e.value});
    all = std::move(filtered);
    m = options.n_cols;
  }
  if (all.empty()) throw validation_error("triplet file: subsampling removed every rating");

  // train = support ∩ scheme-sampled Omega, heldout = support \ Omega
  std::vector<std::pair<Index, Index>> omega = sample_omega(n, m, options.sr, options.scheme, options.seed);
  std::unordered_set<std::uint64_t> in_omega;
  in_omega.reserve(omega.size() * 2);
  for (const auto& [i, j] : omega)
    in_omega.insert(static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(m) +
                    static_cast<std::uint64_t>(j));

  std::vector<Entry> train;
  std::vector<Entry> heldout;
  for (const Entry& e : all) {
    const std::uint64_t key = static_cast<std::uint64_t>(e.row) * static_cast<std::uint64_t>(m) +
                              static_cast<std::uint64_t>(e.col);
    if (in_omega.count(key))
      train.push_back(e);
    else
      heldout.push_back(e);
  }
  if (train.empty()) throw validation_error("triplet file: empty intersection with the sampled set");

  TripletSplit split{ObservationSet(n, m, std::move(train)), std::move(heldout), r_min, r_max, n, m};
  return split;
}

void write_observations(std::ostream& os, const ObservationSet& obs) {
  os << obs.rows() << ' ' << obs.cols() << ' ' << obs.nnz() << '\n';
  os.precision(17);
  for (const Entry& e : obs.entries()) os << e.row << ' ' << e.col << ' ' << e.value << '\n';
}

ObservationSet read_observations(std::istream& is) {
  Index n = 0, m = 0, nnz = 0;
  if (!(is >> n >> m >> nnz) || nnz <= 0) throw validation_error("observation dump: bad header");
  std::vector<Entry> entries(static_cast<std::size_t>(nnz));
  for (Index t = 0; t < nnz; ++t) {
    Entry& e = entries[static_cast<std::size_t>(t)];
    if (!(is >> e.row >> e.col >> e.value)) throw validation_error("observation dump: truncated");
  }
  return ObservationSet(n, m, std::move(entries));
}

void write_observations_file(const std::string& path, const ObservationSet& obs) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_observations(os, obs);
  if (!os) throw std::runtime_error("write failed: " + path);
}

ObservationSet read_observations_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return read_observations(is);
}

}  // namespace l20mc
