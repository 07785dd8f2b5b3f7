#include <doctest.h>

#include <cmath>
#include <memory>
#include <set>
#include <vector>

#include "mtp/error.hpp"
#include "mtp/gateway.hpp"
#include "mtp/preprocess.hpp"
#include "support/helpers.hpp"

using namespace mtp;
using testsupport::catch_error;
using testsupport::contains;
using testsupport::fixture_path;
using testsupport::read_text;

namespace {

const std::vector<ScriptLine> kScript = {
    {"Penny", "Knock knock."},
    {"Leonard", "Hello there."},
    {"Penny", "Who is it?"},
};

std::vector<Utterance> sample_utterances() {
  return ingest_asr_alignment(read_text(fixture_path("asr_sample.json")));
}

// embedding table mirroring the fixture: one basis vector per line
std::shared_ptr<MockBackend> basis_embedder() {
  auto mock = std::make_shared<MockBackend>();
  mock->set_embedding_dim(3);
  mock->set_embedding_vector("Knock knock.", {1.0, 0.0, 0.0});
  mock->set_embedding_vector("Hello there.", {0.0, 1.0, 0.0});
  mock->set_embedding_vector("Who is it?", {0.0, 0.0, 1.0});
  return mock;
}

struct AttributionHarness {
  std::shared_ptr<MockBackend> embed_mock;
  std::shared_ptr<MockBackend> chat_mock;
  std::unique_ptr<ModelGateway> embed_gateway;
  std::unique_ptr<ModelGateway> chat_gateway;
  ModelHandle embedder;
  ModelHandle chat;

  AttributionHarness(std::shared_ptr<MockBackend> embed_backend,
                     std::shared_ptr<MockBackend> chat_backend)
      : embed_mock(std::move(embed_backend)), chat_mock(std::move(chat_backend)) {
    embed_gateway = std::make_unique<ModelGateway>(embed_mock, "", GatewayOptions{});
    chat_gateway = std::make_unique<ModelGateway>(chat_mock, "", GatewayOptions{});
    embedder = {embed_gateway.get(), "embed-model", {}};
    chat = {chat_gateway.get(), "chat-model", {}};
  }
};

std::shared_ptr<MockBackend> confirming_chat() {
  auto mock = std::make_shared<MockBackend>();
  mock->add_rule({MockRule::Kind::Substring, "Knock knock.", {}, "Penny", ""});
  mock->add_rule({MockRule::Kind::Substring, "Hello there.", {}, "Leonard", ""});
  mock->add_rule({MockRule::Kind::Substring, "Who is it?", {}, "Penny", ""});
  return mock;
}

}  // namespace

TEST_CASE("alignment ingest sorts by start and assigns fresh ordinals") {
  std::vector<Utterance> utterances = sample_utterances();
  REQUIRE(utterances.size() == 3);
  // the fixture lists segments out of order on purpose
  CHECK(utterances[0].transcript == "Knock knock.");
  CHECK(utterances[0].start_s == doctest::Approx(0.0));
  CHECK(utterances[0].end_s == doctest::Approx(4.5));
  CHECK(utterances[1].transcript == "Hello there.");
  CHECK(utterances[2].transcript == "Who is it?");
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    CHECK(utterances[i].ordinal == static_cast<int>(i) + 1);
    CHECK(utterances[i].speaker == "UNKNOWN");
  }
}

TEST_CASE("alignment ingest rejects malformed documents") {
  auto no_segments = catch_error([] { ingest_asr_alignment(R"({"result":[]})"); });
  REQUIRE(no_segments.has_value());
  CHECK(contains(no_segments->what(), "segments"));

  auto inverted = catch_error([] {
    ingest_asr_alignment(R"({"segments":[{"start":5,"end":2,"text":"x"}]})");
  });
  REQUIRE(inverted.has_value());
  CHECK(contains(inverted->what(), "segment 0"));
  CHECK(contains(inverted->what(), "start exceeds end"));

  auto empty_text = catch_error([] {
    ingest_asr_alignment(R"({"segments":[{"start":0,"end":1,"text":""}]})");
  });
  REQUIRE(empty_text.has_value());
  CHECK(contains(empty_text->what(), "empty text"));

  auto not_json = catch_error([] { ingest_asr_alignment("{nope"); });
  REQUIRE(not_json.has_value());
  CHECK(not_json->kind() == ErrorKind::Parse);
}

TEST_CASE("speakers are attributed via embedding match plus chat confirmation") {
  std::vector<Utterance> utterances = sample_utterances();
  AttributionHarness h(basis_embedder(), confirming_chat());

  AttributionReport report =
      attribute_speakers(utterances, kScript, h.embedder, h.chat, 0.75);

  REQUIRE(report.rows.size() == 3);
  CHECK(utterances[0].speaker == "Penny");
  CHECK(utterances[1].speaker == "Leonard");
  CHECK(utterances[2].speaker == "Penny");
  for (const AttributionRow& row : report.rows) {
    CHECK(row.decision == "assigned");
    CHECK(row.similarity == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK(report.rows[0].candidate_speaker == "Penny");
  CHECK(report.rows[1].candidate_speaker == "Leonard");
}

TEST_CASE("fixture-driven attribution matches the programmatic setup") {
  std::vector<Utterance> utterances = sample_utterances();
  auto mock = MockBackend::from_file(fixture_path("mock_embed.json"));
  ModelGateway gateway(mock, "", GatewayOptions{});
  ModelHandle handle{&gateway, "m", {}};

  attribute_speakers(utterances, kScript, handle, handle, 0.75);
  CHECK(utterances[0].speaker == "Penny");
  CHECK(utterances[1].speaker == "Leonard");
  CHECK(utterances[2].speaker == "Penny");
}

TEST_CASE("low similarity leaves the speaker unknown without asking the model") {
  std::vector<Utterance> utterances = sample_utterances();
  utterances[0].transcript = "mystery words";

  auto embed_mock = basis_embedder();
  // equidistant from two basis lines: cosine 1/sqrt(2) < 0.75
  embed_mock->set_embedding_vector("mystery words", {1.0, 1.0, 0.0});
  AttributionHarness h(embed_mock, confirming_chat());

  AttributionReport report =
      attribute_speakers(utterances, kScript, h.embedder, h.chat, 0.75);

  CHECK(utterances[0].speaker == "UNKNOWN");
  CHECK(report.rows[0].decision == "below_threshold");
  CHECK(report.rows[0].similarity == doctest::Approx(1.0 / std::sqrt(2.0)));
  // the other two utterances still confirm normally
  CHECK(utterances[1].speaker == "Leonard");
  CHECK(h.chat_mock->call_count() == 2);
}

TEST_CASE("an unrecognized confirmation answer stays unknown") {
  std::vector<Utterance> utterances = sample_utterances();
  auto chat_mock = std::make_shared<MockBackend>();
  chat_mock->set_default_response("Someone else entirely");
  AttributionHarness h(basis_embedder(), chat_mock);

  AttributionReport report =
      attribute_speakers(utterances, kScript, h.embedder, h.chat, 0.75);

  for (const Utterance& u : utterances) CHECK(u.speaker == "UNKNOWN");
  for (const AttributionRow& row : report.rows) CHECK(row.decision == "unconfirmed");
}

TEST_CASE("the model can reassign to another script speaker") {
  std::vector<Utterance> utterances = sample_utterances();
  auto chat_mock = std::make_shared<MockBackend>();
  // candidate for "Knock knock." is Penny; the answer names Leonard instead
  chat_mock->add_rule(
      {MockRule::Kind::Substring, "Knock knock.", {}, "This is Leonard speaking", ""});
  chat_mock->add_rule({MockRule::Kind::Substring, "Hello there.", {}, "Leonard", ""});
  chat_mock->add_rule({MockRule::Kind::Substring, "Who is it?", {}, "Penny", ""});
  AttributionHarness h(basis_embedder(), chat_mock);

  attribute_speakers(utterances, kScript, h.embedder, h.chat, 0.75);
  CHECK(utterances[0].speaker == "Leonard");
}

TEST_CASE("confirmation answers match case-insensitively, assignment keeps script casing") {
  std::vector<Utterance> utterances = sample_utterances();
  auto chat_mock = std::make_shared<MockBackend>();
  chat_mock->add_rule({MockRule::Kind::Substring, "Knock knock.", {}, "penny", ""});
  chat_mock->add_rule({MockRule::Kind::Substring, "Hello there.", {}, "LEONARD", ""});
  chat_mock->add_rule({MockRule::Kind::Substring, "Who is it?", {}, "penny.", ""});
  AttributionHarness h(basis_embedder(), chat_mock);

  attribute_speakers(utterances, kScript, h.embedder, h.chat, 0.75);
  CHECK(utterances[0].speaker == "Penny");
  CHECK(utterances[1].speaker == "Leonard");
  CHECK(utterances[2].speaker == "Penny");
}

TEST_CASE("attribution rejects bad inputs") {
  std::vector<Utterance> utterances = sample_utterances();
  AttributionHarness h(basis_embedder(), confirming_chat());

  auto empty_script = catch_error([&] {
    attribute_speakers(utterances, std::vector<ScriptLine>{}, h.embedder, h.chat, 0.75);
  });
  REQUIRE(empty_script.has_value());
  CHECK(contains(empty_script->what(), "empty script"));

  auto bad_threshold = catch_error(
      [&] { attribute_speakers(utterances, kScript, h.embedder, h.chat, 1.5); });
  REQUIRE(bad_threshold.has_value());
  CHECK(contains(bad_threshold->what(), "(0, 1]"));

  auto zero_threshold = catch_error(
      [&] { attribute_speakers(utterances, kScript, h.embedder, h.chat, 0.0); });
  CHECK(zero_threshold.has_value());
}

TEST_CASE("clip manifest derives names and rejects overlap within an episode") {
  std::vector<SceneBoundary> boundaries = {
      {1, 2, "balcony", 10.0, 20.0},
      {1, 2, "kitchen", 20.0, 35.5},
      {1, 3, "kitchen", 15.0, 25.0},  // other episode, overlap in time is fine
  };
  std::vector<ClipJob> jobs = clip_manifest("episodes/s01e02.mkv", boundaries, "out");
  REQUIRE(jobs.size() == 3);
  CHECK(jobs[0].input_path == "episodes/s01e02.mkv");
  CHECK(contains(jobs[0].output_path, "s01e02_balcony.mp4"));
  CHECK(contains(jobs[1].output_path, "s01e02_kitchen.mp4"));
  CHECK(contains(jobs[2].output_path, "s01e03_kitchen.mp4"));
  CHECK(jobs[0].start_s == doctest::Approx(10.0));
  CHECK(jobs[0].end_s == doctest::Approx(20.0));

  SUBCASE("overlap in one episode names both scenes") {
    boundaries.push_back({1, 2, "hallway", 25.0, 27.0});
    auto err = catch_error([&] { clip_manifest("m.mkv", boundaries, "out"); });
    REQUIRE(err.has_value());
    CHECK(contains(err->what(), "overlapping"));
    CHECK(contains(err->what(), "kitchen"));
    CHECK(contains(err->what(), "hallway"));
  }
  SUBCASE("start must precede end") {
    boundaries.push_back({2, 1, "oops", 30.0, 30.0});
    auto err = catch_error([&] { clip_manifest("m.mkv", boundaries, "out"); });
    REQUIRE(err.has_value());
    CHECK(contains(err->what(), "oops"));
  }
  SUBCASE("scene tags are sanitized for file names") {
    std::vector<SceneBoundary> odd = {{3, 11, "roof top/no.2", 0.0, 5.0}};
    std::vector<ClipJob> sanitized = clip_manifest("m.mkv", odd, "out");
    CHECK(contains(sanitized[0].output_path, "s03e11_roof_top_no_2.mp4"));
  }
}

TEST_CASE("frame times are midpoints or seeded draws inside the utterance") {
  Utterance u;
  u.ordinal = 4;
  u.start_s = 10.0;
  u.end_s = 20.0;
  u.transcript = "x";

  FramePolicy midpoint{FramePolicy::Mode::Midpoint, 0};
  CHECK(sample_frame_time(u, midpoint, "c01") == doctest::Approx(15.0));

  FramePolicy random{FramePolicy::Mode::RandomInUtterance, 99};
  double t1 = sample_frame_time(u, random, "c01");
  CHECK(t1 >= 10.0);
  CHECK(t1 < 20.0);
  // same (seed, conversation, ordinal) always lands on the same instant
  CHECK(sample_frame_time(u, random, "c01") == t1);

  Utterance other = u;
  other.ordinal = 5;
  CHECK(sample_frame_time(other, random, "c01") != t1);
  CHECK(sample_frame_time(u, random, "c02") != t1);

  FramePolicy reseeded{FramePolicy::Mode::RandomInUtterance, 100};
  CHECK(sample_frame_time(u, reseeded, "c01") != t1);

  Utterance degenerate = u;
  degenerate.end_s = degenerate.start_s;
  CHECK(sample_frame_time(degenerate, random, "c01") == doctest::Approx(10.0));
}
