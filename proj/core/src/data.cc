#include "medic/data.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>
#include <string>

#include "medic/errors.h"

namespace medic {

namespace {

constexpr std::uint64_t kSplitSeed = 0x5eed5b117ULL;

std::string join_ids(std::span<const int> ids) {
  std::string out = "{";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(ids[i]);
  }
  return out + "}";
}

}  // namespace

MultiDomainDataset::MultiDomainDataset(std::vector<LabeledSample> samples,
                                       double validation_fraction)
    : samples_(std::move(samples)), validation_fraction_(validation_fraction) {
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must be in [0, 1)");
  }
  std::set<int> domains, classes;
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const LabeledSample& s = samples_[i];
    if (i == 0) feature_dim_ = s.features.size();
    if (s.features.size() != feature_dim_) {
      throw DimensionError("dataset: sample " + std::to_string(i) +
                           " has inconsistent feature dimension");
    }
    if (s.class_id < 0 || s.domain_id < 0) {
      throw DataError("dataset: ids must be non-negative (sample " + std::to_string(i) + ")");
    }
    for (double v : s.features) {
      if (!std::isfinite(v)) {
        throw DataError("dataset: non-finite feature in sample " + std::to_string(i));
      }
    }
    domains.insert(s.domain_id);
    classes.insert(s.class_id);
    all_[{s.domain_id, s.class_id}].push_back(i);
  }
  domains_.assign(domains.begin(), domains.end());
  classes_.assign(classes.begin(), classes.end());

  // Stratified split: each (domain, class) cell sends round(n * fraction) of
  // its samples to validation, chosen by a cell-seeded shuffle.
  validation_.assign(samples_.size(), false);
  for (const auto& [key, positions] : all_) {
    std::vector<std::size_t> order = positions;
    std::seed_seq seq{static_cast<std::uint32_t>(kSplitSeed),
                      static_cast<std::uint32_t>(key.first),
                      static_cast<std::uint32_t>(key.second)};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_val = static_cast<std::size_t>(
        std::lround(static_cast<double>(order.size()) * validation_fraction));
    for (std::size_t k = 0; k < n_val; ++k) validation_[order[k]] = true;
    for (std::size_t pos : positions) {
      (validation_[pos] ? validation_index_ : train_)[key].push_back(pos);
    }
  }
}

bool MultiDomainDataset::has_domain(int domain) const {
  return std::binary_search(domains_.begin(), domains_.end(), domain);
}

std::span<const std::size_t> MultiDomainDataset::lookup(
    const std::map<Key, std::vector<std::size_t>>& m, int domain, int class_id) {
  auto it = m.find({domain, class_id});
  if (it == m.end()) return {};
  return it->second;
}

std::span<const std::size_t> MultiDomainDataset::cell(int domain, int class_id) const {
  return lookup(all_, domain, class_id);
}
std::span<const std::size_t> MultiDomainDataset::train_cell(int domain, int class_id) const {
  return lookup(train_, domain, class_id);
}
std::span<const std::size_t> MultiDomainDataset::validation_cell(int domain,
                                                                 int class_id) const {
  return lookup(validation_index_, domain, class_id);
}

void SyntheticConfig::validate() const {
  if (num_classes < 3) throw ConfigError("synthetic: num_classes must be >= 3");
  if (num_domains < 3) throw ConfigError("synthetic: num_domains must be >= 3");
  if (feature_dim < 2) throw ConfigError("synthetic: feature_dim must be >= 2");
  if (samples_per_class_per_domain < 1) {
    throw ConfigError("synthetic: samples_per_class_per_domain must be >= 1");
  }
  if (!(class_center_radius > 0.0)) throw ConfigError("synthetic: radius must be > 0");
  if (!(cluster_std >= 0.0)) throw ConfigError("synthetic: cluster_std must be >= 0");
  if (!transforms.empty() && transforms.size() != num_domains) {
    throw ConfigError("synthetic: need one transform per domain");
  }
  for (const DomainTransform& t : transforms) {
    if (!t.translation.empty() && t.translation.size() != feature_dim) {
      throw ConfigError("synthetic: translation length must equal feature_dim");
    }
  }
}

std::vector<DomainTransform> rotation_transforms(std::span<const double> degrees) {
  std::vector<DomainTransform> out;
  for (double d : degrees) out.push_back({d, 1.0, {}});
  return out;
}

MultiDomainDataset generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.noise_seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double two_pi = 2.0 * std::numbers::pi;

  std::vector<LabeledSample> samples;
  samples.reserve(cfg.num_domains * cfg.num_classes * cfg.samples_per_class_per_domain);
  for (std::size_t t = 0; t < cfg.num_domains; ++t) {
    const DomainTransform identity;
    const DomainTransform& tf = cfg.transforms.empty() ? identity : cfg.transforms[t];
    const double theta = tf.rotation_deg * std::numbers::pi / 180.0;
    const double cs = std::cos(theta);
    const double sn = std::sin(theta);
    for (std::size_t k = 0; k < cfg.num_classes; ++k) {
      const double angle = two_pi * static_cast<double>(k) / static_cast<double>(cfg.num_classes);
      for (std::size_t n = 0; n < cfg.samples_per_class_per_domain; ++n) {
        std::vector<double> x(cfg.feature_dim, 0.0);
        x[0] = cfg.class_center_radius * std::cos(angle);
        x[1] = cfg.class_center_radius * std::sin(angle);
        for (double& v : x) v += cfg.cluster_std * noise(rng);
        const double x0 = x[0];
        const double x1 = x[1];
        x[0] = cs * x0 - sn * x1;
        x[1] = sn * x0 + cs * x1;
        for (std::size_t i = 0; i < x.size(); ++i) {
          x[i] *= tf.scale;
          if (!tf.translation.empty()) x[i] += tf.translation[i];
        }
        samples.push_back({std::move(x), static_cast<int>(k), static_cast<int>(t)});
      }
    }
  }
  return MultiDomainDataset(std::move(samples), cfg.validation_fraction);
}

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

long parse_id(const std::string& text, const char* what, std::size_t line_no) {
  const char* begin = text.c_str();
  char* end = nullptr;
  const long v = std::strtol(begin, &end, 10);
  if (text.empty() || *end != '\0') {
    throw ParseError(std::string("non-integer ") + what + " '" + text + "'", line_no);
  }
  if (v < 0) throw ParseError(std::string("negative ") + what, line_no);
  return v;
}

double parse_feature(const std::string& text, std::size_t line_no) {
  const char* begin = text.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (text.empty() || *end != '\0' || !std::isfinite(v)) {
    throw ParseError("non-numeric feature '" + text + "'", line_no);
  }
  return v;
}

}  // namespace

MultiDomainDataset read_csv(std::istream& in, double validation_fraction) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing header", 1);
  strip_cr(line);
  const std::vector<std::string> header = split_commas(line);
  if (header.size() < 3 || header[0] != "domain" || header[1] != "class") {
    throw ParseError("header must be domain,class,f0,...", 1);
  }
  const std::size_t dim = header.size() - 2;
  for (std::size_t i = 0; i < dim; ++i) {
    if (header[i + 2] != "f" + std::to_string(i)) {
      throw ParseError("header column " + std::to_string(i + 3) + " must be f" +
                           std::to_string(i),
                       1);
    }
  }

  std::vector<LabeledSample> samples;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_commas(line);
    if (fields.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    LabeledSample s;
    s.domain_id = static_cast<int>(parse_id(fields[0], "domain", line_no));
    s.class_id = static_cast<int>(parse_id(fields[1], "class", line_no));
    s.features.reserve(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      s.features.push_back(parse_feature(fields[i + 2], line_no));
    }
    samples.push_back(std::move(s));
  }
  return MultiDomainDataset(std::move(samples), validation_fraction);
}

MultiDomainDataset load_csv(const std::filesystem::path& path, double validation_fraction) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset " + path.string());
  return read_csv(in, validation_fraction);
}

void write_csv(const MultiDomainDataset& dataset, std::ostream& out) {
  out << "domain,class";
  for (std::size_t i = 0; i < dataset.feature_dim(); ++i) out << ",f" << i;
  out << "\n";
  char buf[40];
  for (const LabeledSample& s : dataset.samples()) {
    out << s.domain_id << "," << s.class_id;
    for (double v : s.features) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << "," << buf;
    }
    out << "\n";
  }
}

void save_csv(const MultiDomainDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_csv(dataset, out);
  if (!out) throw Error("write failed: " + path.string());
}

std::optional<std::size_t> OpenSetProtocol::known_index(int class_id) const {
  auto it = std::lower_bound(known_classes.begin(), known_classes.end(), class_id);
  if (it == known_classes.end() || *it != class_id) return std::nullopt;
  return static_cast<std::size_t>(it - known_classes.begin());
}

OpenSetProtocol make_protocol(const MultiDomainDataset& dataset, int target_domain,
                              std::size_t num_known) {
  if (!dataset.has_domain(target_domain)) {
    throw DataError("target domain " + std::to_string(target_domain) + " not in dataset");
  }
  const std::vector<int>& classes = dataset.classes();  // already ascending
  if (num_known < 1 || num_known >= classes.size()) {
    throw ConfigError("num_known must be in [1, " + std::to_string(classes.size()) +
                      "), got " + std::to_string(num_known));
  }
  OpenSetProtocol p;
  p.target_domain = target_domain;
  for (int d : dataset.domains()) {
    if (d != target_domain) p.source_domains.push_back(d);
  }
  p.known_classes.assign(classes.begin(), classes.begin() + static_cast<long>(num_known));
  p.unknown_classes.assign(classes.begin() + static_cast<long>(num_known), classes.end());
  return p;
}

namespace {

void append_row(Batch& batch, const MultiDomainDataset& dataset, std::size_t position,
                std::size_t label, std::size_t row) {
  const auto& f = dataset.samples()[position].features;
  std::copy(f.begin(), f.end(), batch.x.row(row).begin());
  batch.labels.push_back(label);
  batch.origin.push_back(position);
}

}  // namespace

Batch source_batch(const MultiDomainDataset& dataset, const OpenSetProtocol& protocol,
                   Split split) {
  std::vector<std::pair<std::size_t, std::size_t>> picked;  // (position, label)
  for (int d : protocol.source_domains) {
    for (std::size_t k = 0; k < protocol.known_classes.size(); ++k) {
      const int c = protocol.known_classes[k];
      auto cell = split == Split::kTrain ? dataset.train_cell(d, c)
                                         : dataset.validation_cell(d, c);
      for (std::size_t pos : cell) picked.emplace_back(pos, k);
    }
  }
  std::sort(picked.begin(), picked.end());
  Batch batch{Matrix(picked.size(), dataset.feature_dim()), {}, {}};
  for (std::size_t r = 0; r < picked.size(); ++r) {
    append_row(batch, dataset, picked[r].first, picked[r].second, r);
  }
  return batch;
}

TargetSet target_set(const MultiDomainDataset& dataset, const OpenSetProtocol& protocol) {
  if (!dataset.has_domain(protocol.target_domain)) {
    throw DataError("target domain " + std::to_string(protocol.target_domain) +
                    " not in dataset");
  }
  std::vector<std::size_t> positions;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset.samples()[i].domain_id == protocol.target_domain) positions.push_back(i);
  }
  TargetSet out{Matrix(positions.size(), dataset.feature_dim()), {}};
  for (std::size_t r = 0; r < positions.size(); ++r) {
    const LabeledSample& s = dataset.samples()[positions[r]];
    std::copy(s.features.begin(), s.features.end(), out.x.row(r).begin());
    out.truth.push_back(protocol.known_index(s.class_id));
  }
  return out;
}

namespace {

// Training positions of (domains x classes) with their known-class labels.
std::vector<std::pair<std::size_t, std::size_t>> restriction(
    const MultiDomainDataset& dataset, const OpenSetProtocol& protocol,
    std::span<const int> domains, std::span<const int> classes) {
  std::vector<std::pair<std::size_t, std::size_t>> pool;
  for (int d : domains) {
    for (int c : classes) {
      const auto label = protocol.known_index(c);
      if (!label) throw DataError("class " + std::to_string(c) + " is not a known class");
      for (std::size_t pos : dataset.train_cell(d, c)) pool.emplace_back(pos, *label);
    }
  }
  return pool;
}

Batch draw(const MultiDomainDataset& dataset,
           const std::vector<std::pair<std::size_t, std::size_t>>& pool, std::size_t n,
           std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  Batch batch{Matrix(n, dataset.feature_dim()), {}, {}};
  batch.labels.reserve(n);
  batch.origin.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& [pos, label] = pool[pick(rng)];
    append_row(batch, dataset, pos, label, r);
  }
  return batch;
}

}  // namespace

Batch sample_batch(const MultiDomainDataset& dataset, const OpenSetProtocol& protocol,
                   std::span<const int> domains, std::span<const int> classes,
                   std::size_t n, std::mt19937_64& rng) {
  auto pool = restriction(dataset, protocol, domains, classes);
  if (pool.empty()) {
    throw DataError("sample_batch: empty restriction domains " + join_ids(domains) +
                    " classes " + join_ids(classes));
  }
  return draw(dataset, pool, n, rng);
}

MetaQuad sample_meta_quad(const MultiDomainDataset& dataset,
                          const OpenSetProtocol& protocol, std::size_t batch_per_cell,
                          std::mt19937_64& rng) {
  const auto& sources = protocol.source_domains;
  if (sources.size() < 2) throw ConfigError("meta quad needs at least 2 source domains");
  if (protocol.known_classes.size() < 2) throw ConfigError("meta quad needs |C| >= 2");
  if (batch_per_cell < 1) throw ConfigError("batch_per_cell must be >= 1");

  std::string empty_cell;
  for (int attempt = 0; attempt < kMaxQuadAttempts; ++attempt) {
    QuadSplit split;
    while (split.s1.empty() || split.s2.empty()) {
      split.s1.clear();
      split.s2.clear();
      for (int d : sources) ((rng() & 1U) ? split.s2 : split.s1).push_back(d);
    }
    std::vector<int> perm = protocol.known_classes;
    std::shuffle(perm.begin(), perm.end(), rng);
    const std::size_t half = (perm.size() + 1) / 2;
    split.c1.assign(perm.begin(), perm.begin() + static_cast<long>(half));
    split.c2.assign(perm.begin() + static_cast<long>(half), perm.end());
    std::sort(split.c1.begin(), split.c1.end());
    std::sort(split.c2.begin(), split.c2.end());

    auto f1 = restriction(dataset, protocol, split.s1, split.c1);
    auto f2 = restriction(dataset, protocol, split.s1, split.c2);
    auto g1 = restriction(dataset, protocol, split.s2, split.c1);
    auto g2 = restriction(dataset, protocol, split.s2, split.c2);
    const std::pair<const char*, const decltype(f1)*> cells[] = {
        {"F1", &f1}, {"F2", &f2}, {"G1", &g1}, {"G2", &g2}};
    empty_cell.clear();
    for (const auto& [name, pool] : cells) {
      if (pool->empty()) {
        const bool first_domains = name[0] == 'F';
        const bool first_classes = name[1] == '1';
        empty_cell = std::string(name) + " domains " +
                     join_ids(first_domains ? split.s1 : split.s2) + " classes " +
                     join_ids(first_classes ? split.c1 : split.c2);
        break;
      }
    }
    if (!empty_cell.empty()) continue;

    MetaQuad quad;
    quad.f1 = draw(dataset, f1, batch_per_cell, rng);
    quad.f2 = draw(dataset, f2, batch_per_cell, rng);
    quad.g1 = draw(dataset, g1, batch_per_cell, rng);
    quad.g2 = draw(dataset, g2, batch_per_cell, rng);
    quad.split = std::move(split);
    return quad;
  }
  throw DataCoverageError("sample_meta_quad: no coverage after " +
                          std::to_string(kMaxQuadAttempts) + " attempts; empty cell " +
                          empty_cell);
}

}  // namespace medic
