#include <doctest.h>

#include <map>
#include <random>
#include <set>

#include "eegspec/dataset.hpp"
#include "eegspec/filters.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace eegspec;

namespace {

SynthSpec SmallSpec(std::size_t runs, std::size_t per_class, std::size_t channels, std::size_t samples) {
  SynthSpec spec;
  spec.n_runs = runs;
  spec.trials_per_class_per_run = per_class;
  spec.n_channels = channels;
  spec.n_samples = samples;
  return spec;
}

std::map<MergedLabel, std::size_t> CountLabels(const std::vector<ExampleKey>& keys) {
  std::map<MergedLabel, std::size_t> counts;
  for (const auto& k : keys) ++counts[k.label];
  return counts;
}

StftConfig SmallStft() {
  StftConfig c;
  c.win_len = 62;
  c.hop = 4;
  c.nfft = 63;
  return c;
}

}  // namespace

TEST_CASE("class merging") {
  using R = RawLabel;
  using M = MergedLabel;
  const Scheme four = Scheme::kFourClass, three = Scheme::kThreeClass;
  CHECK(MergeClasses(R::kHandOpen, four) == M::kHandMovement);
  CHECK(MergeClasses(R::kHandClose, four) == M::kHandMovement);
  CHECK(MergeClasses(R::kElbowFlexion, four) == M::kElbowMovement);
  CHECK(MergeClasses(R::kElbowExtension, four) == M::kElbowMovement);
  CHECK(MergeClasses(R::kForearmSupination, four) == M::kForearmMovement);
  CHECK(MergeClasses(R::kForearmPronation, four) == M::kForearmMovement);
  CHECK(MergeClasses(R::kRest, four) == M::kRest);
  CHECK_FALSE(MergeClasses(R::kRest, three).has_value());
  CHECK(MergeClasses(R::kHandClose, three) == M::kHandMovement);

  // Total on the raw labels, onto every merged class.
  std::set<M> image;
  for (R r : kAllRawLabels) image.insert(*MergeClasses(r, four));
  CHECK(image.size() == 4);
  CHECK(NumClasses(four) == 4);
  CHECK(NumClasses(three) == 3);
  CHECK(ClassNames(three) == std::vector<std::string>{"hand_movement", "elbow_movement", "forearm_movement"});
  CHECK(ParseScheme("three_class") == three);
  CHECK(SchemeName(four) == "four_class");
}

TEST_CASE("slicing takes the first samples of every channel") {
  const TrialSet set = SynthesizeDataset(SmallSpec(1, 1, 3, 2048));
  const Trial& t = set.trials[0];
  const Trial s = SliceTrial(t);
  CHECK(s.n_samples == 788);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t n = 0; n < 788; ++n) REQUIRE(s.channel(c)[n] == t.channel(c)[n]);
  }
  const Trial exact = SliceTrial(s);
  CHECK(exact == s);

  const TrialSet short_set = SynthesizeDataset(SmallSpec(1, 1, 1, 500));
  CHECK_FAILS_WITH(SliceTrial(short_set.trials[2]), ErrorCode::kInvalidArgument, "s1r1t3 has 500 samples");
}

TEST_CASE("example enumeration counts") {
  const TrialSet tiny = SynthesizeDataset(SmallSpec(1, 1, 1, 64));
  const auto c4 = CountLabels(EnumerateExamples(tiny, Scheme::kFourClass));
  CHECK(c4.at(MergedLabel::kHandMovement) == 2);
  CHECK(c4.at(MergedLabel::kElbowMovement) == 2);
  CHECK(c4.at(MergedLabel::kForearmMovement) == 2);
  CHECK(c4.at(MergedLabel::kRest) == 1);
  CHECK(EnumerateExamples(tiny, Scheme::kThreeClass).size() == 6);

  const TrialSet full = SynthesizeDataset(SmallSpec(10, 6, 61, 16));
  const auto keys = EnumerateExamples(full, Scheme::kFourClass);
  const auto counts = CountLabels(keys);
  CHECK(counts.at(MergedLabel::kHandMovement) == 7320);
  CHECK(counts.at(MergedLabel::kElbowMovement) == 7320);
  CHECK(counts.at(MergedLabel::kForearmMovement) == 7320);
  CHECK(counts.at(MergedLabel::kRest) == 3660);
  CHECK(keys.size() == 25620);
  CHECK(std::is_sorted(keys.begin(), keys.end(),
                       [](const ExampleKey& a, const ExampleKey& b) { return a.SortKey() < b.SortKey(); }));
  CHECK(keys.front().Id() == "s1r1t1c0");
}

TEST_CASE("split allocation") {
  CHECK(AllocateSplit(7320, {}) == std::array<std::size_t, 3>{5124, 732, 1464});
  CHECK(AllocateSplit(3660, {}) == std::array<std::size_t, 3>{2562, 366, 732});
  CHECK(AllocateSplit(10, {}) == std::array<std::size_t, 3>{7, 1, 2});
  // 13: floors 9/1/2, leftover to train.
  CHECK(AllocateSplit(13, {}) == std::array<std::size_t, 3>{10, 1, 2});
  // 19: floors 13/1/3, leftovers to train then test.
  CHECK(AllocateSplit(19, {}) == std::array<std::size_t, 3>{14, 1, 4});
  CHECK_THROWS_AS(AllocateSplit(10, {0, 0, 0}), Error);
}

TEST_CASE("paper-sized split") {
  const TrialSet full = SynthesizeDataset(SmallSpec(10, 6, 61, 16));
  const auto keys = EnumerateExamples(full, Scheme::kFourClass);
  const SplitManifest m = Split(keys, Scheme::kFourClass, {}, 1, SplitStrategy::kPerExampleStratified);
  CHECK(m.train.size() == 17934);
  CHECK(m.val.size() == 2562);
  CHECK(m.test.size() == 5124);
  CHECK(Split(keys, Scheme::kFourClass, {}, 1, SplitStrategy::kPerExampleStratified) == m);
  CHECK_FALSE(Split(keys, Scheme::kFourClass, {}, 2, SplitStrategy::kPerExampleStratified) == m);

  std::set<std::string> all(m.train.begin(), m.train.end());
  all.insert(m.val.begin(), m.val.end());
  all.insert(m.test.begin(), m.test.end());
  CHECK(all.size() == keys.size());
}

TEST_CASE("split errors") {
  const TrialSet tiny = SynthesizeDataset(SmallSpec(1, 1, 1, 64));
  const auto keys = EnumerateExamples(tiny, Scheme::kFourClass);
  CHECK_FAILS_WITH(Split(keys, Scheme::kFourClass, {}, 1, SplitStrategy::kPerExampleStratified),
                   ErrorCode::kInvalidArgument, "at least 10");
  std::vector<ExampleKey> no_rest;
  for (const auto& k : keys) {
    if (k.label != MergedLabel::kRest) no_rest.push_back(k);
  }
  CHECK_FAILS_WITH(Split(no_rest, Scheme::kFourClass, {}, 1, SplitStrategy::kPerTrialGrouped),
                   ErrorCode::kInvalidArgument, "rest has no examples");
  CHECK_FAILS_WITH(Split(keys, Scheme::kThreeClass, {}, 1, SplitStrategy::kPerTrialGrouped),
                   ErrorCode::kInvalidArgument, "outside the scheme");
}

TEST_CASE("manifest json round-trip") {
  const TrialSet set = SynthesizeDataset(SmallSpec(2, 6, 2, 16));
  const auto keys = EnumerateExamples(set, Scheme::kFourClass);
  const SplitManifest m = Split(keys, Scheme::kFourClass, {}, 9, SplitStrategy::kPerTrialGrouped);
  const std::string json = ManifestToJson(m, "a=1\n");
  CHECK(json.find("\"config\"") != std::string::npos);
  CHECK(ManifestFromJson(json) == m);
  CHECK_FAILS_WITH(ManifestFromJson("[]"), ErrorCode::kFormat, "manifest");
}

TEST_CASE("building examples") {
  const TrialSet set = SynthesizeDataset(SmallSpec(1, 1, 2, 300));
  const auto cascades = std::vector<SosCascade>{DesignNotch(50.0, 512.0, 35.0)};
  const auto four = BuildExamples(set, cascades, SmallStft(), Scheme::kFourClass, 186);
  CHECK(four.size() == set.trials.size() * 2);
  const auto three = BuildExamples(set, cascades, SmallStft(), Scheme::kThreeClass, 186);
  CHECK(three.size() == (set.trials.size() - 1) * 2);
  for (const Example& e : four) {
    CHECK(e.stacked.height() == 32);
    CHECK(e.stacked.width() == 32);
    const auto [lo, hi] = std::minmax_element(e.stacked.plane.data.begin(), e.stacked.plane.data.end());
    CHECK(*lo == 0.0f);
    CHECK(*hi == 1.0f);
  }

  // Filtering runs over the whole trial before the slice is taken.
  const Trial& t = set.trials[3];
  std::vector<double> x(t.channel(1).begin(), t.channel(1).end());
  x = ApplySos(cascades[0], x);
  x.resize(186);
  const Spectrogram expected = LogPower(Stft(x, SmallStft()));
  CHECK(ChannelSpectrogram(t, 1, cascades, SmallStft(), 186).values == expected.values);
  CHECK(Stack3(expected).plane == four[7].stacked.plane);
  CHECK(four[7].key.Id() == "s1r1t4c1");

  CHECK_FAILS_WITH(BuildExamples(TrialSet{}, cascades, SmallStft(), Scheme::kFourClass, 186),
                   ErrorCode::kInvalidArgument, "empty");
  CHECK_FAILS_WITH(BuildExamples(set, cascades, SmallStft(), Scheme::kFourClass, 400), ErrorCode::kInvalidArgument,
                   "s1r1t1c0: trial s1r1t1 has 300 samples");
}

TEST_CASE("example file round-trip") {
  const auto dir = ScratchDir("exs");
  const TrialSet set = SynthesizeDataset(SmallSpec(1, 1, 2, 200));
  const auto ex = BuildExamples(set, {}, SmallStft(), Scheme::kFourClass, 186);
  WriteExamples(ex, dir / "a.exs");
  const auto back = ReadExamples(dir / "a.exs");
  REQUIRE(back.size() == ex.size());
  for (std::size_t i = 0; i < ex.size(); ++i) {
    CHECK(back[i].key == ex[i].key);
    CHECK(back[i].stacked.plane == ex[i].stacked.plane);
  }
  CHECK_FAILS_WITH(ReadExamples(dir / "missing.exs"), ErrorCode::kNotFound, "missing example file");
}

TEST_CASE("subject helpers") {
  SynthSpec spec = SmallSpec(1, 1, 1, 16);
  spec.n_subjects = 3;
  const TrialSet set = SynthesizeDataset(spec);
  CHECK(SubjectIds(set) == std::vector<std::uint16_t>{1, 2, 3});
  const TrialSet two = SubjectSubset(set, 2);
  CHECK(two.trials.size() == 7);
  for (const Trial& t : two.trials) CHECK(t.subject_id == 2);
}
