#include <gtest/gtest.h>

#include <random>
#include <set>

#include "flowfusion/clustering.hpp"
#include "flowfusion/error.hpp"
#include "support.hpp"

using namespace flowfusion;

namespace {

const PinholeIntrinsics kK{100.0, 100.0, 39.5, 29.5, 80, 60};

RgbdFrame flat_frame(double depth, double intensity) {
  RgbdFrame f;
  f.intrinsics = kK;
  f.intensity = ImageD(kK.width, kK.height, intensity);
  f.depth = ImageD(kK.width, kK.height, depth);
  return f;
}

// left half at z = 1, right half at z = 3
RgbdFrame two_planes() {
  RgbdFrame f = flat_frame(1.0, 0.5);
  for (int y = 0; y < f.height(); ++y)
    for (int x = f.width() / 2; x < f.width(); ++x) f.depth(x, y) = 3.0;
  return f;
}

RgbdFrame random_frame(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> z(0.5, 4.0), i(0.0, 1.0), hole(0.0, 1.0);
  RgbdFrame f = flat_frame(1.0, 0.5);
  // smooth-ish depth: piecewise planes with random holes
  const double a = z(rng), b = (i(rng) - 0.5) * 0.05, c = (i(rng) - 0.5) * 0.05;
  for (int y = 0; y < f.height(); ++y)
    for (int x = 0; x < f.width(); ++x) {
      f.depth(x, y) = hole(rng) < 0.1 ? 0.0 : std::max(0.3, a + b * x + c * y);
      f.intensity(x, y) = i(rng);
    }
  return f;
}

void expect_partition(const ClusterSet& cs, const RgbdFrame& f) {
  std::vector<std::size_t> counts(cs.count(), 0);
  std::size_t valid = 0;
  for (int y = 0; y < f.height(); ++y)
    for (int x = 0; x < f.width(); ++x) {
      const int l = cs.labels(x, y);
      if (f.depth(x, y) > 0) {
        ++valid;
        ASSERT_GE(l, 0);
        ASSERT_LT(l, static_cast<int>(cs.count()));
        ++counts[l];
      } else {
        ASSERT_EQ(l, -1);
      }
    }
  std::size_t total = 0;
  for (std::size_t i = 0; i < cs.count(); ++i) {
    EXPECT_EQ(counts[i], cs.clusters[i].size);
    EXPECT_GE(cs.clusters[i].size, 1u);
    EXPECT_GT(cs.clusters[i].mean_depth, 0.0);
    total += cs.clusters[i].size;
  }
  EXPECT_EQ(total, valid);
}

}  // namespace

TEST(ClusterFrame, ConstantSceneIsOneCluster) {
  const RgbdFrame f = flat_frame(2.0, 0.4);
  ClusteringParams p;
  p.seed_resolution = 10.0;
  const ClusterSet cs = cluster_frame(f, kK, p);
  ASSERT_EQ(cs.count(), 1u);
  EXPECT_EQ(cs.clusters[0].size, f.intensity.size());
  EXPECT_NEAR(cs.clusters[0].mean_depth, 2.0, 1e-12);
  EXPECT_NEAR(cs.clusters[0].mean_intensity, 0.4, 1e-12);
}

TEST(ClusterFrame, NoClusterStraddlesADepthGap) {
  const RgbdFrame f = two_planes();
  ClusteringParams p;
  p.seed_resolution = 0.5;
  const ClusterSet cs = cluster_frame(f, kK, p);
  std::vector<std::set<double>> depths(cs.count());
  for (int y = 0; y < f.height(); ++y)
    for (int x = 0; x < f.width(); ++x) depths[cs.labels(x, y)].insert(f.depth(x, y));
  for (const auto& d : depths) EXPECT_EQ(d.size(), 1u);
}

TEST(ClusterFrame, CountOnFullResolutionRoom) {
  SyntheticSceneSpec spec = fftest::room_spec(1);
  spec.intrinsics = PinholeIntrinsics{500.0, 500.0, 319.5, 239.5, 640, 480};
  const SyntheticSequence seq = generate_synthetic_sequence(spec);
  const ClusterSet cs = cluster_frame(seq.frames[0], spec.intrinsics, ClusteringParams{});
  EXPECT_GE(cs.count(), 50u);
  EXPECT_LE(cs.count(), 400u);
  expect_partition(cs, seq.frames[0]);
}

TEST(ClusterFrame, EmptyCloudThrows) {
  const RgbdFrame f = flat_frame(0.0, 0.5);
  EXPECT_THROW(cluster_frame(f, kK, ClusteringParams{}), EmptyCloudError);
}

TEST(ClusterFrame, PartitionProperty) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const RgbdFrame f = random_frame(rng);
    ClusteringParams p;
    p.seed_resolution = 0.05 + 0.1 * (trial % 4);
    expect_partition(cluster_frame(f, kK, p), f);
  }
}

TEST(ClusterFrame, DeterministicProperty) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const RgbdFrame f = random_frame(rng);
    ClusteringParams p;
    p.seed_resolution = 0.1;
    const ClusterSet a = cluster_frame(f, kK, p);
    const ClusterSet b = cluster_frame(f, kK, p);
    const ClusterSet c = cluster_frame(f, kK, p, Execution::serial);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_EQ(a.labels, c.labels);
    EXPECT_EQ(a.cost_history, c.cost_history);
  }
}

TEST(ClusterFrame, CostIsMonotoneProperty) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const RgbdFrame f = random_frame(rng);
    ClusteringParams p;
    p.seed_resolution = 0.08;
    p.max_kmeans_iters = 15;
    const ClusterSet cs = cluster_frame(f, kK, p);
    ASSERT_FALSE(cs.cost_history.empty());
    for (std::size_t i = 1; i < cs.cost_history.size(); ++i)
      EXPECT_LE(cs.cost_history[i], cs.cost_history[i - 1] * (1 + 1e-12)) << "trial " << trial << " step " << i;
  }
}

TEST(ClusterSet, FromLabelsRenumbersAndDropsEmpty) {
  const RgbdFrame f = flat_frame(2.0, 0.5);
  Image<int> labels(kK.width, kK.height, 7);
  for (int y = 0; y < kK.height; ++y) labels(0, y) = 3;
  const ClusterSet cs = ClusterSet::from_labels(labels, f, 0.3);
  ASSERT_EQ(cs.count(), 2u);
  EXPECT_EQ(cs.labels(0, 0), 0);
  EXPECT_EQ(cs.labels(1, 0), 1);
  EXPECT_EQ(cs.clusters[0].size, static_cast<std::size_t>(kK.height));
}

TEST(ClusterSet, FromLabelsRejectsLabelOnInvalidDepth) {
  RgbdFrame f = flat_frame(2.0, 0.5);
  f.depth(3, 3) = 0.0;
  Image<int> labels(kK.width, kK.height, 0);
  EXPECT_THROW(ClusterSet::from_labels(labels, f, 0.3), ParameterError);
  labels(3, 3) = -1;
  EXPECT_NO_THROW(ClusterSet::from_labels(labels, f, 0.3));
}

TEST(Adjacency, SingleClusterHasNoEdges) {
  const RgbdFrame f = flat_frame(2.0, 0.5);
  const ClusterSet cs = ClusterSet::from_labels(Image<int>(kK.width, kK.height, 0), f, 0.3);
  const AdjacencyGraph g = build_adjacency(cs);
  EXPECT_EQ(g.node_count(), 1u);
  EXPECT_EQ(g.edge_count(), 0u);
}

TEST(Adjacency, HalvesAtSameDepthShareOneEdge) {
  const RgbdFrame f = flat_frame(1.0, 0.5);
  Image<int> labels(kK.width, kK.height, 0);
  for (int y = 0; y < kK.height; ++y)
    for (int x = kK.width / 2; x < kK.width; ++x) labels(x, y) = 1;
  const AdjacencyGraph g = build_adjacency(ClusterSet::from_labels(labels, f, 0.3));
  EXPECT_EQ(g.edge_count(), 1u);
  EXPECT_TRUE(g.connected(0, 1));
  EXPECT_TRUE(g.connected(1, 0));
}

TEST(Adjacency, NoEdgeAcrossDepthGap) {
  const RgbdFrame f = two_planes();
  Image<int> labels(kK.width, kK.height, 0);
  for (int y = 0; y < kK.height; ++y)
    for (int x = kK.width / 2; x < kK.width; ++x) labels(x, y) = 1;
  const ClusterSet cs = ClusterSet::from_labels(labels, f, 0.3);
  // centroid oracle: the planes are 2 m apart, far beyond 2 * 0.3
  EXPECT_GT((cs.clusters[0].centroid - cs.clusters[1].centroid).norm(), 0.6);
  EXPECT_EQ(build_adjacency(cs).edge_count(), 0u);
}

TEST(Adjacency, AddEdgeIgnoresSelfAndDuplicates) {
  AdjacencyGraph g(3);
  g.add_edge(0, 0);
  g.add_edge(2, 1);
  g.add_edge(1, 2);
  EXPECT_EQ(g.edge_count(), 1u);
  EXPECT_EQ(g.edges()[0], std::make_pair(1, 2));
  EXPECT_FALSE(g.connected(0, 0));
}

TEST(Adjacency, SymmetricIrreflexiveProperty) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const RgbdFrame f = random_frame(rng);
    ClusteringParams p;
    p.seed_resolution = 0.1;
    const ClusterSet cs = cluster_frame(f, kK, p);
    const AdjacencyGraph g = build_adjacency(cs);
    for (std::size_t i = 0; i < g.node_count(); ++i) {
      EXPECT_FALSE(g.connected(i, i));
      for (int j : g.neighbors(i)) EXPECT_TRUE(g.connected(j, i));
    }
    for (auto [i, j] : g.edges()) {
      EXPECT_LT(i, j);
      EXPECT_LT((cs.clusters[i].centroid - cs.clusters[j].centroid).norm(), 2 * cs.seed_resolution);
    }
  }
}
