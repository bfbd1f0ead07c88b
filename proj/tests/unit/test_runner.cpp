// Copyright 2026 The vlmicl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <doctest.h>

#include <cstdlib>
#include <thread>

#include <fstream>
#include <set>
#include <sstream>

#include "../support/expect_error.hpp"
#include "../support/fixture_tree.hpp"
#include "vlmicl/random.hpp"
#include "vlmicl/runner.hpp"

using namespace vlmicl;
using namespace vlmicl::testing;
namespace fs = std::filesystem;

namespace {

const fs::path& fixture_root() {
  static const fs::path root = [] {
    FixtureSpec spec;
    spec.root = scratch_dir("runner-fixture");
    make_fixture_tree(spec);
    return spec.root;
  }();
  return root;
}

const Dataset& fixture() {
  static const Dataset ds = load_dataset(fixture_root());
  return ds;
}

RunConfig config_for(StrategyKind kind, const std::string& out_name, std::uint64_t seed = 0) {
  RunConfig c;
  c.dataset_root = fixture_root();
  c.strategy = kind;
  c.seed = seed;
  c.output_dir = scratch_dir(out_name);
  return c;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary | std::ios::trunc) << text;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

RunResult run_with(const RunConfig& c, const Answer& answer, const RunOptions& options = {}) {
  MockProvider provider(script_for(c, answer));
  return run_experiment(c, provider, options);
}

// Fails one plan with a transport error, answers the rest correctly.
class FlakyProvider final : public Provider {
 public:
  FlakyProvider(MockScript script, std::string failing_key, ErrorCategory category)
      : inner_(std::move(script)), failing_key_(std::move(failing_key)), category_(category) {}
  ModelResponse send(const PromptPackage& p) override {
    if (p.request_key == failing_key_) {
      if (category_ == ErrorCategory::kTransport) throw TransportError(503, 5, "service unavailable");
      throw Error(category_, "injected");
    }
    return inner_.send(p);
  }

 private:
  MockProvider inner_;
  std::string failing_key_;
  ErrorCategory category_;
};

}  // namespace

TEST_SUITE("runner") {
  TEST_CASE("plan counts and coverage") {
    const std::size_t tests = fixture().count(Split::kTest);
    REQUIRE(tests == 46);
    struct Want {
      StrategyKind kind;
      std::size_t plans;
      std::size_t shots;
    };
    for (const auto& w : {Want{StrategyKind::kNaive, 46, 0}, Want{StrategyKind::kIcl1, 46, 2},
                          Want{StrategyKind::kIcl2, 46, 2}, Want{StrategyKind::kIcl3, 16, 2},
                          Want{StrategyKind::kIcl4, 16, 6}, Want{StrategyKind::kIclR2, 16, 6}}) {
      CAPTURE(strategy_name(w.kind));
      const auto plans = plan_requests(config_for(w.kind, "plans"), fixture());
      CHECK(plans.size() == w.plans);
      std::multiset<std::string> seen;
      for (const auto& p : plans) {
        CHECK(p.examples.size() == w.shots);
        for (const auto& e : p.examples) CHECK(e.split == Split::kTrain);
        for (const auto& q : p.queries) {
          CHECK(q.split == Split::kTest);
          seen.insert(q.id);
        }
      }
      CHECK(seen.size() == tests);
      CHECK(std::set<std::string>(seen.begin(), seen.end()).size() == tests);
      if (w.plans == 16) CHECK(plans.back().queries.size() == 1);
    }
    auto limited = config_for(StrategyKind::kIcl4, "plans");
    limited.limit = 1;
    const auto one = plan_requests(limited, fixture());
    REQUIRE(one.size() == 1);
    CHECK(one[0].queries.size() == 1);
  }

  TEST_CASE("examples are class-0 block then class-1 block") {
    const auto plans = plan_requests(config_for(StrategyKind::kIcl4, "plans"), fixture());
    for (const auto& p : plans) {
      REQUIRE(p.examples.size() == 6);
      for (int i = 0; i < 3; ++i) CHECK(p.examples[i].label.name() == "COVID");
      for (int i = 3; i < 6; ++i) CHECK(p.examples[i].label.name() == "Normal");
    }
  }

  TEST_CASE("fixed versus resampled shots") {
    auto c = config_for(StrategyKind::kIcl1, "plans", 7);
    const auto fixed = plan_requests(c, fixture());
    for (const auto& p : fixed) {
      CHECK(p.shot_seed == 7);
      CHECK(p.examples[0].id == fixed[0].examples[0].id);
    }
    CHECK(fixed[0].examples[0].id == stratified_sample(fixture(), Split::kTrain, 1, 7)[0].id);

    c.shot_mode = ShotMode::kResamplePerRequest;
    const auto resampled = plan_requests(c, fixture());
    std::set<std::string> firsts;
    for (const auto& p : resampled) {
      CHECK(p.shot_seed == derive_seed(7, p.plan_index));
      firsts.insert(p.examples[0].id);
    }
    CHECK(firsts.size() > 10);
    CHECK(plan_requests(c, fixture())[5].examples[1].id == resampled[5].examples[1].id);
    // the query order does not depend on the shot mode
    for (std::size_t i = 0; i < fixed.size(); ++i) CHECK(fixed[i].queries[0].id == resampled[i].queries[0].id);
  }

  TEST_CASE("test order depends on the seed only") {
    const auto a = plan_requests(config_for(StrategyKind::kNaive, "plans", 1), fixture());
    const auto b = plan_requests(config_for(StrategyKind::kNaive, "plans", 1), fixture());
    const auto c = plan_requests(config_for(StrategyKind::kNaive, "plans", 2), fixture());
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].queries[0].id == b[i].queries[0].id);
      differs = differs || a[i].queries[0].id != c[i].queries[0].id;
    }
    CHECK(differs);
  }

  TEST_CASE("all-correct runs score perfectly for every strategy") {
    for (StrategyKind kind : all_strategies()) {
      CAPTURE(strategy_name(kind));
      const auto c = config_for(kind, "allcorrect");
      const auto r = run_with(c, all_correct());
      REQUIRE(r.completed);
      REQUIRE(r.metrics);
      CHECK(r.metrics->accuracy.num == 46);
      CHECK(r.metrics->accuracy.den == 46);
      const bool figures = Strategy::make(kind).combine_into_figure;
      CHECK(fs::exists(c.output_dir / "figures") == figures);
      if (figures) {
        std::size_t n = 0;
        for ([[maybe_unused]] const auto& e : fs::directory_iterator(c.output_dir / "figures")) ++n;
        CHECK(n == (kind == StrategyKind::kIcl3 ? 46u : plan_requests(c, fixture()).size()));
      }
      const auto scored = score_manifest(r.manifest_path);
      CHECK(scored.matches_embedded);
      CHECK_FALSE(scored.parser_config_changed);
      CHECK(scored.parsed_count == 46);
    }
  }

  TEST_CASE("mock run reproduces a chosen confusion matrix") {
    const auto c = config_for(StrategyKind::kNaive, "matrix");
    const auto r = run_with(c, answers_for_matrix(fixture(), 20, 16));
    REQUIRE(r.metrics);
    CHECK(r.metrics->matrix == ConfusionMatrix{20, 4, 6, 16, 0});
    CHECK(r.metrics->accuracy.rounded_text() == "0.78");
    CHECK(r.requests_sent == 46);
  }

  TEST_CASE("manifest records are complete and self-describing") {
    const auto c = config_for(StrategyKind::kIcl4, "records");
    const auto r = run_with(c, all_correct());
    const auto lines = lines_of(read_text(r.manifest_path));
    REQUIRE(lines.size() == 18);
    const auto header = nlohmann::json::parse(lines.front());
    CHECK(header["kind"] == "header");
    CHECK(header["format"] == kManifestFormat);
    CHECK(header["plan_count"] == 16);
    CHECK(header["config"] == c.snapshot());
    CHECK(header["templates"].size() == 7);
    for (std::size_t i = 1; i < 17; ++i) {
      const auto rec = nlohmann::json::parse(lines[i]);
      CHECK(rec["kind"] == "request");
      CHECK(rec["plan_index"] == i - 1);
      CHECK(rec["examples"].size() == 6);
      CHECK(rec["figures"].size() == 1);
      CHECK(rec["attachments"].size() == 1);
      CHECK(rec["error"].is_null());
      CHECK_FALSE(rec["prompt_text"].get<std::string>().empty());
      CHECK(rec.contains("volatile"));
    }
    CHECK(nlohmann::json::parse(lines.back())["kind"] == "summary");
  }

  TEST_CASE("transport failures mark items unparseable and the run continues") {
    auto c = config_for(StrategyKind::kIcl4, "flaky");
    FlakyProvider provider(script_for(c, all_correct()), "plan-2", ErrorCategory::kTransport);
    const auto r = run_experiment(c, provider);
    REQUIRE(r.completed);
    CHECK(r.metrics->matrix.total() == 46);
    CHECK(r.metrics->accuracy.num == 43);
    const auto rec = nlohmann::json::parse(lines_of(read_text(r.manifest_path))[3]);
    CHECK(rec["error"]["category"] == "transport");
    CHECK(rec["error"]["last_status"] == 503);
    CHECK(rec["attempts"] == 5);
    for (const auto& p : rec["predictions"]) CHECK(p["status"] == "unparseable");

    c.abstention = AbstentionPolicy::kExclude;
    c.output_dir = scratch_dir("flaky-excl");
    FlakyProvider again(script_for(c, all_correct()), "plan-2", ErrorCategory::kTransport);
    const auto excl = run_experiment(c, again);
    CHECK(excl.metrics->matrix.total() == 43);
    CHECK(excl.metrics->matrix.excluded == 3);
  }

  TEST_CASE("payload errors are recorded; other errors abort") {
    auto c = config_for(StrategyKind::kNaive, "payload");
    FlakyProvider payload(script_for(c, all_correct()), "plan-1", ErrorCategory::kPayload);
    CHECK(run_experiment(c, payload).completed);

    c.output_dir = scratch_dir("abort");
    FlakyProvider credential(script_for(c, all_correct()), "plan-4", ErrorCategory::kCredential);
    CHECK(catch_error([&] { run_experiment(c, credential); }).category == ErrorCategory::kCredential);
    // records before the failing plan are kept for a later resume
    const auto lines = lines_of(read_text(c.output_dir / std::string(kManifestFileName)));
    CHECK(lines.size() == 5);
  }

  TEST_CASE("resume matches an uninterrupted run") {
    for (int concurrency : {1, 4}) {
      CAPTURE(concurrency);
      auto whole = config_for(StrategyKind::kIcl3, "whole", 3);
      whole.concurrency = concurrency;
      const auto full = run_with(whole, answers_for_matrix(fixture(), 17, 12));

      auto parts = config_for(StrategyKind::kIcl3, "parts", 3);
      parts.concurrency = concurrency;
      const auto first = run_with(parts, answers_for_matrix(fixture(), 17, 12), RunOptions{5});
      CHECK_FALSE(first.completed);
      CHECK(first.requests_sent == 5);
      // a torn final line, as left by a crash mid-write
      std::ofstream(first.manifest_path, std::ios::app) << R"({"kind":"request","plan_)";
      const auto second = run_with(parts, answers_for_matrix(fixture(), 17, 12));
      CHECK(second.completed);
      CHECK(second.requests_resumed == 5);
      CHECK(second.requests_sent == 11);
      CHECK(*second.metrics == *full.metrics);
      CHECK(strip_volatile(read_text(second.manifest_path)) == strip_volatile(read_text(full.manifest_path)));

      const auto third = run_with(parts, answers_for_matrix(fixture(), 17, 12));
      CHECK(third.requests_sent == 0);
      CHECK(third.requests_resumed == 16);
    }
  }

  TEST_CASE("concurrency does not change the manifest") {
    auto one = config_for(StrategyKind::kIcl2, "conc1", 9);
    one.concurrency = 1;
    auto four = config_for(StrategyKind::kIcl2, "conc4", 9);
    four.concurrency = 4;
    const auto a = run_with(one, all_correct());
    const auto b = run_with(four, all_correct());
    CHECK(strip_volatile(read_text(a.manifest_path)) == strip_volatile(read_text(b.manifest_path)));
  }

  TEST_CASE("resuming with a different configuration is refused") {
    auto c = config_for(StrategyKind::kIcl1, "mismatch", 1);
    run_with(c, all_correct(), RunOptions{3});
    c.seed = 2;
    const auto caught = catch_error([&] { run_with(c, all_correct()); });
    CHECK(caught.category == ErrorCategory::kConfig);
    CHECK(caught.message.find("different configuration") != std::string::npos);
  }

  TEST_CASE("stricter synonyms never parse more") {
    const auto c = config_for(StrategyKind::kNaive, "synonyms");
    // half the answers use a synonym instead of the class name
    const auto r = run_with(c, [](const LabeledImage& q) {
      const bool odd = q.id.back() % 2 == 1;
      if (q.label.name() == "COVID") return std::string(odd ? "positive" : "COVID");
      return std::string(odd ? "healthy" : "Normal");
    });
    const auto lenient = score_manifest(r.manifest_path);
    CHECK(lenient.parsed_count == 46);
    CHECK_FALSE(lenient.parser_config_changed);

    const auto partial = score_manifest(r.manifest_path, std::map<std::string, std::string>{{"positive", "COVID"}});
    const auto strict = score_manifest(r.manifest_path, std::map<std::string, std::string>{});
    CHECK(partial.parser_config_changed);
    CHECK(strict.parser_config_changed);
    CHECK(strict.parsed_count < 46);
    CHECK(strict.parsed_count <= partial.parsed_count);
    CHECK(partial.parsed_count <= lenient.parsed_count);
    CHECK_FALSE(strict.matches_embedded);
  }

  TEST_CASE("corrupt manifests raise integrity errors naming the line") {
    const auto c = config_for(StrategyKind::kNaive, "corrupt");
    const auto r = run_with(c, all_correct());
    const auto good = lines_of(read_text(r.manifest_path));
    const fs::path bad = scratch_dir("corrupt-case") / "manifest.jsonl";

    auto expect_integrity = [&](const std::string& text, const std::string& needle) {
      write_text(bad, text);
      const auto caught = catch_error([&] { score_manifest(bad); });
      CHECK(caught.category == ErrorCategory::kIntegrity);
      CHECK_MESSAGE(caught.message.find(needle) != std::string::npos, caught.message);
    };

    auto torn = join_lines(good);
    torn.resize(torn.size() - 20);
    expect_integrity(torn, "line 48");

    auto no_summary = good;
    no_summary.pop_back();
    expect_integrity(join_lines(no_summary), "summary");

    auto duplicate = good;
    duplicate.insert(duplicate.begin() + 3, good[2]);
    expect_integrity(join_lines(duplicate), "line 4");

    auto no_header = std::vector<std::string>(good.begin() + 1, good.end());
    expect_integrity(join_lines(no_header), "line 1");

    auto after_summary = good;
    after_summary.push_back(good[1]);
    expect_integrity(join_lines(after_summary), "line 49");

    auto missing_field = good;
    auto rec = nlohmann::json::parse(missing_field[5]);
    rec.erase("raw_response");
    missing_field[5] = rec.dump();
    expect_integrity(join_lines(missing_field), "line 6");

    CHECK(catch_error([&] { score_manifest(scratch_dir("none") / "missing.jsonl"); }).category.has_value());
  }

  TEST_CASE("prediction CSV scoring") {
    const fs::path csv = scratch_dir("csv") / "preds.csv";
    write_text(csv,
               "item_id,true_label,predicted_label\n"
               "a,COVID,COVID\nb,COVID,Normal\nc,Normal,Normal\nd,Normal,COVID\ne,Normal,Normal\nf,COVID,\n");
    const auto m = score_predictions_csv(csv);
    CHECK(m.matrix == ConfusionMatrix{1, 1, 2, 2, 0});
    CHECK(m.positive().label == "COVID");
    const auto flipped = score_predictions_csv(csv, std::array<std::string, 2>{"Normal", "COVID"});
    CHECK(flipped.positive().label == "Normal");
    CHECK(flipped.matrix == ConfusionMatrix{2, 2, 1, 1, 0});

    write_text(csv, "item_id,true_label,predicted_label\na,COVID,Flu\nb,Normal,Normal\n");
    CHECK(catch_error([&] { score_predictions_csv(csv); }).category == ErrorCategory::kTaskArity);
    CHECK(catch_error([&] {
            score_predictions_csv(csv, std::array<std::string, 2>{"COVID", "Normal"});
          }).category == ErrorCategory::kScoring);
    write_text(csv, "id,label\n");
    CHECK(catch_error([&] { score_predictions_csv(csv); }).category == ErrorCategory::kIntegrity);
  }

  TEST_CASE("summary CSV") {
    std::vector<fs::path> manifests;
    for (std::uint64_t seed : {1, 2}) {
      const auto c = config_for(StrategyKind::kIcl1, "summary", seed);
      manifests.push_back(run_with(c, answers_for_matrix(fixture(), 20 + seed, 16)).manifest_path);
    }
    manifests.push_back(run_with(config_for(StrategyKind::kNaive, "summary"), all_correct()).manifest_path);
    const auto rows = lines_of(summary_csv(manifests));
    REQUIRE(rows.size() == 5);
    CHECK(rows[0] == kSummaryCsvHeader);
    CHECK(rows[1].rfind("naive,0,26,0,0,20,", 0) == 0);
    CHECK(rows[2].rfind("icl1,1,21,4,5,16,", 0) == 0);
    CHECK(rows[3].rfind("icl1,2,22,4,4,16,", 0) == 0);
    CHECK(rows[4].rfind("icl1,mean,43,8,9,32,", 0) == 0);
  }

  TEST_CASE("run options from text") {
    RunConfig c;
    set_run_option(c, "strategy", "ICL-R2");
    set_run_option(c, "Seed", "12");
    set_run_option(c, "resample-per-request", "true");
    set_run_option(c, "class_order", "Normal,COVID");
    set_run_option(c, "synonyms", R"({"sick":"COVID"})");
    set_run_option(c, "abstention_policy", "exclude");
    CHECK(c.strategy == StrategyKind::kIclR2);
    CHECK(c.seed == 12);
    CHECK(c.shot_mode == ShotMode::kResamplePerRequest);
    CHECK(c.class_order == std::array<std::string, 2>{"Normal", "COVID"});
    CHECK(c.synonyms->at("sick") == "COVID");
    CHECK(c.abstention == AbstentionPolicy::kExclude);
    for (const auto& [key, value] : std::vector<std::pair<std::string, std::string>>{
             {"strategy", "icl9"}, {"seed", "-1"}, {"limit", "x"}, {"colour", "red"},
             {"class_order", "A"}, {"synonyms", "[1]"}, {"abstention_policy", "maybe"}}) {
      CAPTURE(key);
      CHECK(catch_error([&] { set_run_option(c, key, value); }).category.has_value());
    }
    CHECK(catch_error([&] { set_run_option(c, "colour", "red"); }).category ==
          ErrorCategory::kInvalidArgument);
  }

  TEST_CASE("strip_volatile removes only volatile members") {
    const std::string text = R"({"kind":"request","a":1,"volatile":{"t":"x"}})"
                             "\n"
                             R"({"kind":"summary","b":2})"
                             "\n";
    const auto out = lines_of(strip_volatile(text));
    REQUIRE(out.size() == 2);
    CHECK(nlohmann::json::parse(out[0]) == nlohmann::json::parse(R"({"kind":"request","a":1})"));
    CHECK(nlohmann::json::parse(out[1]) == nlohmann::json::parse(R"({"kind":"summary","b":2})"));
  }
  TEST_CASE("live provider runs never record the credential") {
    httplib::Server server;
    server.Post("/v1/chat/completions", [](const httplib::Request&, httplib::Response& res) {
      const nlohmann::json body = {{"id", "r"}, {"choices", {{{"message", {{"content", "Image 1: COVID"}}}}}}};
      res.set_content(body.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    auto c = config_for(StrategyKind::kNaive, "live");
    c.limit = 4;
    const fs::path provider = c.output_dir.parent_path() / (c.output_dir.filename().string() + "-provider.json");
    write_text(provider, nlohmann::json{{"endpoint", "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions"},
                                        {"model", "local-test"},
                                        {"credential_env", "VLMICL_RUNNER_TEST_KEY"},
                                        {"max_requests_per_minute", 60000}}
                             .dump());
    c.provider_config = provider;
    ::unsetenv("VLMICL_RUNNER_TEST_KEY");
    CHECK(catch_error([&] { run_experiment(c); }).category == ErrorCategory::kCredential);
    CHECK_FALSE(fs::exists(c.output_dir / std::string(kManifestFileName)));

    const std::string secret = "sk-never-persist-7f3a";
    ::setenv("VLMICL_RUNNER_TEST_KEY", secret.c_str(), 1);
    const auto r = run_experiment(c);
    ::unsetenv("VLMICL_RUNNER_TEST_KEY");
    server.stop();
    thread.join();
    REQUIRE(r.completed);
    CHECK(r.metrics->matrix.total() == 4);
    for (const auto& e : fs::recursive_directory_iterator(c.output_dir)) {
      if (e.is_regular_file()) CHECK(read_text(e.path()).find(secret) == std::string::npos);
    }
  }
}
