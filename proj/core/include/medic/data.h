#ifndef MEDIC_DATA_H_
#define MEDIC_DATA_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "medic/losses.h"

namespace medic {

struct LabeledSample {
  std::vector<double> features;
  int class_id = 0;
  int domain_id = 0;

  friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

inline constexpr double kDefaultValidationFraction = 0.1;

// Samples indexed by (domain, class) with a per-domain validation split that
// is stratified by class. The split is a deterministic function of the sample
// order, so reloading the same file yields the same split.
class MultiDomainDataset {
 public:
  MultiDomainDataset() = default;
  explicit MultiDomainDataset(std::vector<LabeledSample> samples,
                              double validation_fraction = kDefaultValidationFraction);

  const std::vector<LabeledSample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  std::size_t feature_dim() const { return feature_dim_; }
  double validation_fraction() const { return validation_fraction_; }

  // Sorted distinct ids.
  const std::vector<int>& domains() const { return domains_; }
  const std::vector<int>& classes() const { return classes_; }
  bool has_domain(int domain) const;

  bool is_validation(std::size_t position) const { return validation_[position]; }

  // Positions of every / training-split / validation-split sample in a cell.
  // Empty when the cell has no samples.
  std::span<const std::size_t> cell(int domain, int class_id) const;
  std::span<const std::size_t> train_cell(int domain, int class_id) const;
  std::span<const std::size_t> validation_cell(int domain, int class_id) const;

 private:
  using Key = std::pair<int, int>;
  static std::span<const std::size_t> lookup(const std::map<Key, std::vector<std::size_t>>& m,
                                             int domain, int class_id);

  std::vector<LabeledSample> samples_;
  std::size_t feature_dim_ = 0;
  double validation_fraction_ = kDefaultValidationFraction;
  std::vector<int> domains_;
  std::vector<int> classes_;
  std::vector<bool> validation_;
  std::map<Key, std::vector<std::size_t>> all_;
  std::map<Key, std::vector<std::size_t>> train_;
  std::map<Key, std::vector<std::size_t>> validation_index_;
};

struct DomainTransform {
  double rotation_deg = 0.0;  // applied in the (f0, f1) plane
  double scale = 1.0;
  std::vector<double> translation;  // empty or feature_dim long

  friend bool operator==(const DomainTransform&, const DomainTransform&) = default;
};

// Gaussian clusters on a ring, one cluster per class, with a per-domain
// affine transform.
struct SyntheticConfig {
  std::size_t num_domains = 4;
  std::size_t num_classes = 8;
  std::size_t samples_per_class_per_domain = 100;
  std::size_t feature_dim = 2;
  double class_center_radius = 5.0;
  double cluster_std = 0.1;
  // One per domain; empty means identity for every domain.
  std::vector<DomainTransform> transforms;
  std::uint64_t noise_seed = 0;
  double validation_fraction = kDefaultValidationFraction;

  void validate() const;
};

// Domains rotated by `degrees[t]` with unit scale and no translation.
std::vector<DomainTransform> rotation_transforms(std::span<const double> degrees);

MultiDomainDataset generate_synthetic(const SyntheticConfig& cfg);

// CSV with header `domain,class,f0,...,f{d-1}`. Features are written with 17
// significant digits.
MultiDomainDataset read_csv(std::istream& in,
                            double validation_fraction = kDefaultValidationFraction);
MultiDomainDataset load_csv(const std::filesystem::path& path,
                            double validation_fraction = kDefaultValidationFraction);
void write_csv(const MultiDomainDataset& dataset, std::ostream& out);
void save_csv(const MultiDomainDataset& dataset, const std::filesystem::path& path);

// Leave-one-domain-out open-set split. Classes sorted ascending; the first
// num_known are known, the rest unknown.
struct OpenSetProtocol {
  std::vector<int> source_domains;
  int target_domain = 0;
  std::vector<int> known_classes;
  std::vector<int> unknown_classes;

  std::size_t num_known() const { return known_classes.size(); }
  // Position of class_id in known_classes, if known.
  std::optional<std::size_t> known_index(int class_id) const;
};

OpenSetProtocol make_protocol(const MultiDomainDataset& dataset, int target_domain,
                              std::size_t num_known);

enum class Split { kTrain, kValidation };

// Known-class source samples of one split, labels mapped to known indices.
Batch source_batch(const MultiDomainDataset& dataset, const OpenSetProtocol& protocol,
                   Split split);

// All target-domain samples. Labels hold the known index, or num_known for
// unknown classes.
struct TargetSet {
  Matrix x;
  std::vector<std::optional<std::size_t>> truth;
};
TargetSet target_set(const MultiDomainDataset& dataset, const OpenSetProtocol& protocol);

// n draws with replacement from the training split restricted to the given
// domains and classes. Batch::origin records the drawn positions.
Batch sample_batch(const MultiDomainDataset& dataset, const OpenSetProtocol& protocol,
                   std::span<const int> domains, std::span<const int> classes,
                   std::size_t n, std::mt19937_64& rng);

struct QuadSplit {
  std::vector<int> s1, s2;  // domain ids, sorted
  std::vector<int> c1, c2;  // class ids, sorted
};

// The four batches of one dualistic meta-learning iteration:
//   f1 ~ (S1, C1), f2 ~ (S1, C2), g1 ~ (S2, C1), g2 ~ (S2, C2).
struct MetaQuad {
  Batch f1, f2, g1, g2;
  QuadSplit split;
};

inline constexpr int kMaxQuadAttempts = 100;

MetaQuad sample_meta_quad(const MultiDomainDataset& dataset,
                          const OpenSetProtocol& protocol, std::size_t batch_per_cell,
                          std::mt19937_64& rng);

}  // namespace medic

#endif  // MEDIC_DATA_H_
