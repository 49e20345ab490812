#include "fedscore/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>
#include <string_view>

#include "fedscore/rng.hpp"

namespace fedscore {

void SyntheticSpec::validate(const LabelSpace& space) const {
  if (n_features == 0) throw Error(ErrorKind::InvalidSpec, "n_features must be >= 1");
  if (labels.size() != space.size()) {
    throw Error(ErrorKind::InvalidSpec, "expected one distribution per label (" +
                                            std::to_string(space.size()) + "), got " +
                                            std::to_string(labels.size()));
  }
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const auto& d = labels[k];
    const std::string where = "label '" + space.names()[k] + "': ";
    if (d.mean.size() != n_features || d.stddev.size() != n_features) {
      throw Error(ErrorKind::InvalidSpec, where + "mean/stddev length must equal n_features");
    }
    if (d.pool_size < 1) throw Error(ErrorKind::InvalidSpec, where + "pool_size must be >= 1");
    for (std::size_t f = 0; f < n_features; ++f) {
      if (!std::isfinite(d.mean[f])) throw Error(ErrorKind::InvalidSpec, where + "non-finite mean");
      if (!(d.stddev[f] > 0.0) || !std::isfinite(d.stddev[f])) {
        throw Error(ErrorKind::InvalidSpec, where + "stddev must be finite and > 0");
      }
    }
  }
}

LabelPools generate_synthetic(const SyntheticSpec& spec, const LabelSpace& space, std::uint64_t seed) {
  spec.validate(space);
  LabelPools pools(space.size());
  std::vector<double> x(spec.n_features);
  for (std::size_t k = 0; k < space.size(); ++k) {
    const auto& dist = spec.labels[k];
    // Independent stream per label: resizing one pool leaves the others intact.
    Xoshiro256 rng(derive_seed(seed, {stream::kPool, k}));
    Dataset& pool = pools[k];
    pool.n_features = spec.n_features;
    pool.features.reserve(dist.pool_size * spec.n_features);
    pool.labels.reserve(dist.pool_size);
    const LabelId id{static_cast<std::uint16_t>(k)};
    for (std::size_t n = 0; n < dist.pool_size; ++n) {
      for (std::size_t f = 0; f < spec.n_features; ++f) x[f] = dist.mean[f] + dist.stddev[f] * rng.normal();
      pool.append(x, id);
    }
  }
  return pools;
}

Dataset concat(const LabelPools& pools) {
  Dataset out;
  if (pools.empty()) return out;
  out.n_features = pools.front().n_features;
  for (const auto& p : pools) {
    if (p.n_features != out.n_features) throw Error(ErrorKind::ShapeMismatch, "pools differ in width");
    out.features.insert(out.features.end(), p.features.begin(), p.features.end());
    out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
  }
  return out;
}

LabelPools split_by_label(const Dataset& data, const LabelSpace& space) {
  data.validate(space);
  LabelPools pools(space.size());
  for (auto& p : pools) p.n_features = data.n_features;
  for (std::size_t r = 0; r < data.size(); ++r) pools[data.labels[r].value].append(data.row(r), data.labels[r]);
  return pools;
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

}  // namespace

Dataset parse_csv_dataset(std::istream& in, const LabelSpace& space) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::ParseError, "missing header line");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_commas(line);
  if (header.size() < 2 || header[0] != "label") {
    throw Error(ErrorKind::ParseError, "header must be 'label,f0,...'");
  }
  for (std::size_t f = 1; f < header.size(); ++f) {
    if (header[f] != "f" + std::to_string(f - 1)) {
      throw Error(ErrorKind::ParseError, "header column " + std::to_string(f) + " must be 'f" +
                                             std::to_string(f - 1) + "'");
    }
  }
  Dataset data;
  data.n_features = header.size() - 1;
  std::vector<double> x(data.n_features);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (fields.size() != header.size()) {
      throw Error(ErrorKind::ParseError, where + "expected " + std::to_string(header.size()) +
                                             " fields, got " + std::to_string(fields.size()));
    }
    const std::string label(fields[0]);
    if (!space.contains(label)) throw Error(ErrorKind::UnknownLabel, where + "'" + label + "'");
    for (std::size_t f = 0; f < data.n_features; ++f) {
      const auto field = fields[f + 1];
      const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), x[f]);
      if (ec != std::errc{} || end != field.data() + field.size() || !std::isfinite(x[f])) {
        throw Error(ErrorKind::ParseError, where + "bad number '" + std::string(field) + "'");
      }
    }
    data.append(x, space.index(label));
  }
  return data;
}

Dataset load_csv_dataset(const std::filesystem::path& path, const LabelSpace& space) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path.string() + "'");
  try {
    return parse_csv_dataset(in, space);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.message());
  }
}

void write_csv_dataset(std::ostream& out, const Dataset& data, const LabelSpace& space) {
  out << "label";
  for (std::size_t f = 0; f < data.n_features; ++f) out << ",f" << f;
  out << '\n';
  char buf[64];
  for (std::size_t r = 0; r < data.size(); ++r) {
    out << space.name(data.labels[r]);
    for (double v : data.row(r)) {
      const auto res = std::to_chars(buf, buf + sizeof buf, v);
      out << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    out << '\n';
  }
}

FeatureScaling FeatureScaling::fit(const Dataset& reference) {
  if (reference.empty()) throw Error(ErrorKind::InvalidArgument, "cannot fit scaling on an empty dataset");
  const std::size_t d = reference.n_features;
  const double n = static_cast<double>(reference.size());
  FeatureScaling s{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  for (std::size_t r = 0; r < reference.size(); ++r) {
    auto x = reference.row(r);
    for (std::size_t f = 0; f < d; ++f) s.mean[f] += x[f];
  }
  for (auto& m : s.mean) m /= n;
  std::vector<double> var(d, 0.0);
  for (std::size_t r = 0; r < reference.size(); ++r) {
    auto x = reference.row(r);
    for (std::size_t f = 0; f < d; ++f) var[f] += (x[f] - s.mean[f]) * (x[f] - s.mean[f]);
  }
  for (std::size_t f = 0; f < d; ++f) {
    const double sd = std::sqrt(var[f] / n);
    s.inv_std[f] = sd > 0.0 ? 1.0 / sd : 1.0;
  }
  return s;
}

void FeatureScaling::apply(Dataset& data) const {
  if (data.n_features != mean.size()) throw Error(ErrorKind::ShapeMismatch, "scaling width mismatch");
  for (std::size_t r = 0; r < data.size(); ++r) {
    auto x = data.row(r);
    for (std::size_t f = 0; f < x.size(); ++f) x[f] = (x[f] - mean[f]) * inv_std[f];
  }
}

void PartitionPlan::validate(const LabelSpace& space) const {
  for (std::size_t m = 0; m < clients.size(); ++m) {
    const auto& c = clients[m];
    const std::string where = "client " + std::to_string(m) + ": ";
    if (c.labels.empty()) throw Error(ErrorKind::InvalidSpec, where + "no labels");
    for (auto l : c.labels) {
      if (l.value >= space.size()) throw Error(ErrorKind::UnknownLabel, where + "label out of range");
    }
    if (c.base_counts.size() != c.labels.size()) {
      throw Error(ErrorKind::InvalidSpec, where + "base_counts must have one entry per label");
    }
    for (const auto& [it, counts] : c.count_overrides) {
      if (counts.size() != c.labels.size()) {
        throw Error(ErrorKind::InvalidSpec, where + "override for iteration " + std::to_string(it) +
                                                " has wrong length");
      }
    }
    for (const auto& [it, mult] : c.skew) {
      if (mult.size() != c.labels.size()) {
        throw Error(ErrorKind::InvalidSpec, where + "skew for iteration " + std::to_string(it) +
                                                " has wrong length");
      }
      for (double w : mult) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorKind::InvalidSpec, where + "skew must be >= 0");
      }
    }
    if (!(c.random_skew >= 0.0 && c.random_skew <= 1.0)) {
      throw Error(ErrorKind::InvalidSpec, where + "random_skew must lie in [0, 1]");
    }
  }
}

std::vector<std::size_t> PartitionPlan::counts(std::size_t client, int iteration, std::uint64_t seed) const {
  const ClientPlan& c = clients.at(client);
  std::vector<std::size_t> base = c.base_counts;
  if (auto it = c.count_overrides.find(iteration); it != c.count_overrides.end()) base = it->second;

  std::vector<double> mult;
  if (auto it = c.skew.find(iteration); it != c.skew.end()) {
    mult = it->second;
  } else if (c.random_skew > 0.0) {
    Xoshiro256 rng(derive_seed(seed, {stream::kSkew, client, static_cast<std::uint64_t>(iteration)}));
    mult.resize(base.size());
    for (auto& w : mult) w = rng.uniform(1.0 - c.random_skew, 1.0 + c.random_skew);
  } else {
    return base;
  }

  // Redistribute the iteration total in proportion to base * multiplier
  // (largest remainder, ties to the lower label).
  const std::size_t total = std::accumulate(base.begin(), base.end(), std::size_t{0});
  std::vector<double> weight(base.size());
  double weight_sum = 0.0;
  for (std::size_t k = 0; k < base.size(); ++k) {
    weight[k] = static_cast<double>(base[k]) * mult[k];
    weight_sum += weight[k];
  }
  if (total == 0 || weight_sum <= 0.0) return std::vector<std::size_t>(base.size(), 0);
  std::vector<std::size_t> out(base.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < base.size(); ++k) {
    const double exact = static_cast<double>(total) * weight[k] / weight_sum;
    out[k] = static_cast<std::size_t>(std::floor(exact));
    assigned += out[k];
    remainders.emplace_back(exact - std::floor(exact), k);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t j = 0; assigned < total; ++j, ++assigned) ++out[remainders[j % remainders.size()].second];
  return out;
}

ShardSampler::ShardSampler(const LabelPools& pools, const PartitionPlan& plan, std::uint64_t seed)
    : pools_(&pools), plan_(&plan), seed_(seed) {
  slices_.resize(plan.clients.size());
  for (std::size_t m = 0; m < plan.clients.size(); ++m) slices_[m].resize(plan.clients[m].labels.size());
  for (std::size_t k = 0; k < pools.size(); ++k) {
    const LabelId label{static_cast<std::uint16_t>(k)};
    std::vector<std::pair<std::size_t, std::size_t>> claimants;  // (client, label position)
    for (std::size_t m = 0; m < plan.clients.size(); ++m) {
      const auto& ls = plan.clients[m].labels;
      auto it = std::find(ls.begin(), ls.end(), label);
      if (it != ls.end()) claimants.emplace_back(m, static_cast<std::size_t>(it - ls.begin()));
    }
    if (claimants.empty()) continue;
    for (std::size_t row = 0; row < pools[k].size(); ++row) {
      const auto [m, pos] = claimants[row % claimants.size()];
      slices_[m][pos].push_back(row);
    }
  }
}

Shard ShardSampler::draw(std::size_t client, int iteration) const {
  if (client >= plan_->clients.size()) throw Error(ErrorKind::InvalidArgument, "client out of range");
  if (iteration < 1) throw Error(ErrorKind::InvalidArgument, "iterations are numbered from 1");
  const ClientPlan& cp = plan_->clients[client];
  const auto want = plan_->counts(client, iteration, seed_);

  std::vector<std::size_t> offset(cp.labels.size(), 0);
  for (int t = 1; t < iteration; ++t) {
    const auto prior = plan_->counts(client, t, seed_);
    for (std::size_t k = 0; k < offset.size(); ++k) offset[k] += prior[k];
  }

  Shard shard;
  shard.data.n_features = pools_->empty() ? 0 : pools_->front().n_features;
  shard.pool_rows.resize(cp.labels.size());
  for (std::size_t k = 0; k < cp.labels.size(); ++k) {
    if (want[k] == 0) continue;
    const LabelId label = cp.labels[k];
    const auto& slice = slices_[client][k];
    if (slice.empty()) {
      throw Error(ErrorKind::PoolExhausted, "client " + std::to_string(client) + " has no rows of label " +
                                                std::to_string(label.value));
    }
    const Dataset& pool = (*pools_)[label.value];
    const std::size_t n = slice.size();
    std::size_t generation = offset[k] / n;
    std::size_t pos = offset[k] % n;
    if (pos == 0 && generation > 0) {
      // Previous draw ended exactly on a boundary; the reshuffle belongs to this draw.
      --generation;
      pos = n;
    }
    auto permutation = [&](std::size_t gen) {
      std::vector<std::size_t> perm = slice;
      Xoshiro256 rng(derive_seed(seed_, {stream::kSlice, client, label.value, gen}));
      rng.shuffle(std::span<std::size_t>(perm));
      return perm;
    };
    auto perm = permutation(generation);
    for (std::size_t taken = 0; taken < want[k]; ++taken) {
      if (pos == n) {
        ++generation;
        pos = 0;
        perm = permutation(generation);
        shard.reshuffles.push_back(ReshuffleEvent{iteration, client, label, generation});
      }
      const std::size_t row = perm[pos++];
      shard.pool_rows[k].push_back(row);
      shard.data.append(pool.row(row), label);
    }
  }
  return shard;
}

Shard draw_shard(const LabelPools& pools, const PartitionPlan& plan, std::size_t client, int iteration,
                 std::uint64_t seed) {
  return ShardSampler(pools, plan, seed).draw(client, iteration);
}

}  // namespace fedscore
