#include <algorithm>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "medic/data.h"
#include "medic/errors.h"

namespace medic {
namespace {

SyntheticConfig small_config() {
  SyntheticConfig c;
  c.num_domains = 3;
  c.num_classes = 8;
  c.samples_per_class_per_domain = 20;
  c.transforms = rotation_transforms(std::vector<double>{0, 30, 60});
  c.noise_seed = 5;
  return c;
}

TEST(SyntheticTest, CountAndDeterminism) {
  const MultiDomainDataset a = generate_synthetic(small_config());
  EXPECT_EQ(a.size(), 3u * 8u * 20u);
  EXPECT_EQ(a.samples(), generate_synthetic(small_config()).samples());
  SyntheticConfig other = small_config();
  other.noise_seed = 6;
  EXPECT_NE(a.samples(), generate_synthetic(other).samples());
  EXPECT_EQ(a.domains(), (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(a.classes().size(), 8u);
}

TEST(SyntheticTest, IdentityDomainsDifferOnlyByNoise) {
  SyntheticConfig c = small_config();
  c.transforms.clear();
  c.cluster_std = 0.0;
  const MultiDomainDataset d = generate_synthetic(c);
  for (const LabeledSample& s : d.samples()) {
    const double angle = 2.0 * std::numbers::pi * s.class_id / 8.0;
    EXPECT_NEAR(s.features[0], 5.0 * std::cos(angle), 1e-12);
    EXPECT_NEAR(s.features[1], 5.0 * std::sin(angle), 1e-12);
  }
}

TEST(SyntheticTest, RotationMovesCenters) {
  SyntheticConfig c = small_config();
  c.cluster_std = 0.0;
  const MultiDomainDataset d = generate_synthetic(c);
  for (const LabeledSample& s : d.samples()) {
    const double angle = 2.0 * std::numbers::pi * s.class_id / 8.0 +
                         s.domain_id * 30.0 * std::numbers::pi / 180.0;
    EXPECT_NEAR(s.features[0], 5.0 * std::cos(angle), 1e-12);
    EXPECT_NEAR(s.features[1], 5.0 * std::sin(angle), 1e-12);
  }
}

TEST(SyntheticTest, InvalidConfig) {
  SyntheticConfig c = small_config();
  c.num_classes = 2;
  EXPECT_THROW(generate_synthetic(c), ConfigError);
  c = small_config();
  c.num_domains = 2;
  c.transforms.clear();
  EXPECT_THROW(generate_synthetic(c), ConfigError);
  c = small_config();
  c.feature_dim = 1;
  EXPECT_THROW(generate_synthetic(c), ConfigError);
  c = small_config();
  c.transforms.pop_back();
  EXPECT_THROW(generate_synthetic(c), ConfigError);
}

TEST(DatasetTest, IndexCoversEverySampleOnce) {
  const MultiDomainDataset d = generate_synthetic(small_config());
  std::vector<int> seen(d.size(), 0);
  for (int dom : d.domains()) {
    for (int cls : d.classes()) {
      for (std::size_t p : d.cell(dom, cls)) {
        ++seen[p];
        EXPECT_EQ(d.samples()[p].domain_id, dom);
        EXPECT_EQ(d.samples()[p].class_id, cls);
      }
      EXPECT_EQ(d.train_cell(dom, cls).size() + d.validation_cell(dom, cls).size(),
                d.cell(dom, cls).size());
      EXPECT_EQ(d.validation_cell(dom, cls).size(), 2u);  // round(20 * 0.1)
    }
  }
  for (int s : seen) EXPECT_EQ(s, 1);
  EXPECT_TRUE(d.cell(9, 0).empty());
}

TEST(DatasetTest, SplitIsDisjointAndStableUnderReload) {
  const MultiDomainDataset d = generate_synthetic(small_config());
  for (int dom : d.domains()) {
    for (int cls : d.classes()) {
      for (std::size_t p : d.train_cell(dom, cls)) EXPECT_FALSE(d.is_validation(p));
      for (std::size_t p : d.validation_cell(dom, cls)) EXPECT_TRUE(d.is_validation(p));
    }
  }
  std::stringstream ss;
  write_csv(d, ss);
  const MultiDomainDataset back = read_csv(ss);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(back.is_validation(i), d.is_validation(i));
}

TEST(CsvTest, SingleRow) {
  std::istringstream in("domain,class,f0,f1\n0,3,1.5,-2\n");
  const MultiDomainDataset d = read_csv(in);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d.samples()[0], (LabeledSample{{1.5, -2.0}, 3, 0}));
  EXPECT_EQ(d.feature_dim(), 2u);
}

TEST(CsvTest, RaggedRowNamesLine) {
  std::istringstream in("domain,class,f0,f1\n0,0,1,2\n0,1,3\n");
  try {
    read_csv(in);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(CsvTest, BadInput) {
  std::istringstream no_header("0,0,1,2\n");
  EXPECT_THROW(read_csv(no_header), ParseError);
  std::istringstream text("domain,class,f0\n0,0,abc\n");
  try {
    read_csv(text);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream negative("domain,class,f0\n-1,0,1\n");
  EXPECT_THROW(read_csv(negative), ParseError);
  std::istringstream nan("domain,class,f0\n0,0,nan\n");
  EXPECT_THROW(read_csv(nan), ParseError);
}

TEST(CsvTest, RoundTripIsExact) {
  const MultiDomainDataset d = generate_synthetic(small_config());
  std::stringstream ss;
  write_csv(d, ss);
  const std::string text = ss.str();
  EXPECT_TRUE(text.starts_with("domain,class,f0,f1\n"));
  const MultiDomainDataset back = read_csv(ss);
  EXPECT_EQ(back.samples(), d.samples());
  std::stringstream again;
  write_csv(back, again);
  EXPECT_EQ(again.str(), text);
}

TEST(ProtocolTest, FirstKClassesAreKnown) {
  const MultiDomainDataset d = generate_synthetic(small_config());
  const OpenSetProtocol p = make_protocol(d, 1, 6);
  EXPECT_EQ(p.known_classes, (std::vector<int>{0, 1, 2, 3, 4, 5}));
  EXPECT_EQ(p.unknown_classes, (std::vector<int>{6, 7}));
  EXPECT_EQ(p.source_domains, (std::vector<int>{0, 2}));
  EXPECT_EQ(p.target_domain, 1);
  EXPECT_EQ(p.known_index(4), 4u);
  EXPECT_FALSE(p.known_index(7).has_value());

  const OpenSetProtocol one = make_protocol(d, 0, 7);
  EXPECT_EQ(one.unknown_classes, (std::vector<int>{7}));
}

TEST(ProtocolTest, Errors) {
  const MultiDomainDataset d = generate_synthetic(small_config());
  EXPECT_THROW(make_protocol(d, 0, 0), ConfigError);
  EXPECT_THROW(make_protocol(d, 0, 8), ConfigError);
  EXPECT_THROW(make_protocol(d, 5, 6), DataError);
}

TEST(ProtocolTest, SourceBatchesDropUnknownsAndTarget) {
  const MultiDomainDataset d = generate_synthetic(small_config());
  const OpenSetProtocol p = make_protocol(d, 2, 6);
  const Batch train = source_batch(d, p, Split::kTrain);
  const Batch val = source_batch(d, p, Split::kValidation);
  EXPECT_EQ(train.size(), 2u * 6u * 18u);
  EXPECT_EQ(val.size(), 2u * 6u * 2u);
  for (const Batch* b : {&train, &val}) {
    for (std::size_t i = 0; i < b->size(); ++i) {
      const LabeledSample& s = d.samples()[b->origin[i]];
      EXPECT_NE(s.domain_id, 2);
      EXPECT_LT(s.class_id, 6);
      EXPECT_EQ(b->labels[i], static_cast<std::size_t>(s.class_id));
      EXPECT_EQ(d.is_validation(b->origin[i]), b == &val);
    }
  }
  const TargetSet t = target_set(d, p);
  EXPECT_EQ(t.x.rows(), 8u * 20u);
  std::size_t unknown = 0;
  for (const auto& truth : t.truth) unknown += !truth.has_value();
  EXPECT_EQ(unknown, 2u * 20u);
}

TEST(SampleBatchTest, Restriction) {
  const MultiDomainDataset d = generate_synthetic(small_config());
  const OpenSetProtocol p = make_protocol(d, 2, 6);
  std::mt19937_64 rng(1);
  const std::vector<int> doms{1};
  const std::vector<int> classes{2, 4};
  const Batch b = sample_batch(d, p, doms, classes, 50, rng);
  EXPECT_EQ(b.size(), 50u);
  for (std::size_t i = 0; i < b.size(); ++i) {
    const LabeledSample& s = d.samples()[b.origin[i]];
    EXPECT_EQ(s.domain_id, 1);
    EXPECT_TRUE(s.class_id == 2 || s.class_id == 4);
    EXPECT_FALSE(d.is_validation(b.origin[i]));
  }
  std::mt19937_64 r1(7), r2(7);
  EXPECT_EQ(sample_batch(d, p, doms, classes, 10, r1).origin,
            sample_batch(d, p, doms, classes, 10, r2).origin);
  const std::vector<int> unknown{7};
  EXPECT_THROW(sample_batch(d, p, doms, unknown, 1, rng), DataError);
}

TEST(SampleBatchTest, SingleSampleRestriction) {
  std::vector<LabeledSample> s;
  for (int dom = 0; dom < 3; ++dom) {
    for (int cls = 0; cls < 3; ++cls) s.push_back({{double(dom), double(cls)}, cls, dom});
  }
  const MultiDomainDataset d(s, 0.0);
  const OpenSetProtocol p = make_protocol(d, 2, 2);
  std::mt19937_64 rng(3);
  const std::vector<int> doms{1};
  const std::vector<int> classes{0};
  const Batch b = sample_batch(d, p, doms, classes, 1, rng);
  EXPECT_EQ(b.x, (Matrix{{1.0, 0.0}}));
  EXPECT_EQ(b.labels, (std::vector<std::size_t>{0}));
}

bool subset(const std::vector<int>& sub, const std::vector<int>& set) {
  return std::all_of(sub.begin(), sub.end(), [&](int v) {
    return std::find(set.begin(), set.end(), v) != set.end();
  });
}

TEST(MetaQuadTest, InvariantsOverManyDraws) {
  SyntheticConfig c = small_config();
  c.num_domains = 4;
  c.transforms.clear();
  const MultiDomainDataset d = generate_synthetic(c);
  const OpenSetProtocol p = make_protocol(d, 3, 6);
  std::mt19937_64 rng(11);
  std::set<std::vector<int>> s1_seen;
  for (int draw = 0; draw < 1000; ++draw) {
    const MetaQuad q = sample_meta_quad(d, p, 3, rng);
    const QuadSplit& sp = q.split;
    ASSERT_FALSE(sp.s1.empty());
    ASSERT_FALSE(sp.s2.empty());
    std::vector<int> doms = sp.s1;
    doms.insert(doms.end(), sp.s2.begin(), sp.s2.end());
    std::sort(doms.begin(), doms.end());
    EXPECT_EQ(doms, p.source_domains);  // disjoint and covering
    std::vector<int> classes = sp.c1;
    classes.insert(classes.end(), sp.c2.begin(), sp.c2.end());
    std::sort(classes.begin(), classes.end());
    EXPECT_EQ(classes, p.known_classes);
    EXPECT_EQ(sp.c1.size(), 3u);
    EXPECT_EQ(sp.c2.size(), 3u);
    s1_seen.insert(sp.s1);

    const std::pair<const Batch*, std::pair<const std::vector<int>*, const std::vector<int>*>>
        cells[] = {{&q.f1, {&sp.s1, &sp.c1}},
                   {&q.f2, {&sp.s1, &sp.c2}},
                   {&q.g1, {&sp.s2, &sp.c1}},
                   {&q.g2, {&sp.s2, &sp.c2}}};
    for (const auto& [batch, allowed] : cells) {
      ASSERT_EQ(batch->size(), 3u);
      for (std::size_t i = 0; i < batch->size(); ++i) {
        const LabeledSample& s = d.samples()[batch->origin[i]];
        EXPECT_TRUE(subset({s.domain_id}, *allowed.first));
        EXPECT_TRUE(subset({s.class_id}, *allowed.second));
      }
    }
  }
  // Three sources: six ordered nonempty bipartitions, all reachable.
  EXPECT_EQ(s1_seen.size(), 6u);
}

TEST(MetaQuadTest, TwoSourcesGiveSingletons) {
  const MultiDomainDataset d = generate_synthetic(small_config());
  const OpenSetProtocol p = make_protocol(d, 0, 5);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 50; ++i) {
    const MetaQuad q = sample_meta_quad(d, p, 1, rng);
    EXPECT_EQ(q.split.s1.size(), 1u);
    EXPECT_EQ(q.split.s2.size(), 1u);
    EXPECT_EQ(q.split.c1.size(), 3u);
    EXPECT_EQ(q.split.c2.size(), 2u);
  }
}

TEST(MetaQuadTest, CoverageErrorNamesCell) {
  // Domain 1 has no class 0 samples, so any split putting domain 1 alone on a
  // side with class 0 fails; with two sources that is every split.
  std::vector<LabeledSample> s;
  for (int dom = 0; dom < 3; ++dom) {
    for (int cls = 0; cls < 3; ++cls) {
      if (dom == 1 && cls == 0) continue;
      for (int k = 0; k < 4; ++k) s.push_back({{double(k), double(cls)}, cls, dom});
    }
  }
  const MultiDomainDataset d(s);
  const OpenSetProtocol p = make_protocol(d, 2, 2);
  std::mt19937_64 rng(4);
  try {
    sample_meta_quad(d, p, 2, rng);
    FAIL() << "expected DataCoverageError";
  } catch (const DataCoverageError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("domains {1}"), std::string::npos) << msg;
    EXPECT_NE(msg.find("classes {0}"), std::string::npos) << msg;
  }
}

TEST(MetaQuadTest, NeedsTwoSources) {
  std::vector<LabeledSample> s;
  for (int dom : {0, 2}) {
    for (int cls = 0; cls < 3; ++cls) s.push_back({{0.0}, cls, dom});
  }
  const MultiDomainDataset d(s);
  const OpenSetProtocol p = make_protocol(d, 2, 2);
  std::mt19937_64 rng(1);
  EXPECT_THROW(sample_meta_quad(d, p, 1, rng), ConfigError);
}

}  // namespace
}  // namespace medic
