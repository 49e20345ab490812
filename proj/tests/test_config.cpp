#include <string>

#include "doctest.h"
#include "fedscore/config.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace fedscore;
using fedscore::testing::kind_of;
using nlohmann::json;

namespace {

json base_config() {
  return json::parse(R"({
    "labels": ["a", "b", "c"],
    "iterations": 2,
    "master_seed": 5,
    "data": {"synthetic": {"n_features": 2, "public_per_label": 10, "pool_size": 100,
      "distributions": {"a": {"mean": [0, 0], "stddev": 1},
                        "b": {"mean": [2, 0], "stddev": [1, 0.5]},
                        "c": {"mean": [0, 2], "stddev": 1, "pool_size": 60}}}},
    "train": {"learning_rate": 0.01},
    "clients": [
      {"id": "u1", "labels": ["a", "b"], "shard_per_label": 20,
       "arch_schedule": [{"from_iteration": 1, "hidden": [{"units": 4, "activation": "relu"}]},
                         {"from_iteration": 2, "hidden": []}]},
      {"id": "u2", "labels": ["c", "b"], "shard_per_label": {"b": 5, "c": 15},
       "train": {"max_epochs": 2},
       "shard_overrides": [{"iteration": 2, "per_label": 3}],
       "skew": [{"iteration": 1, "multipliers": {"b": 2, "c": 1}}]}
    ]})");
}

std::string error_of(const json& doc) {
  try {
    parse_config_text(doc.dump());
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ConfigInvalid);
    return e.message();
  }
  return "";
}

}  // namespace

TEST_CASE("a full config parses") {
  json doc = base_config();
  doc["clients"][1]["arch_schedule"] = json::parse(R"([{"from_iteration": 1, "hidden": [{"units": 3}]}])");
  const ExperimentConfig cfg = parse_config_text(doc.dump());
  CHECK(cfg.label_space.size() == 3);
  CHECK(cfg.iterations == 2);
  CHECK(cfg.master_seed == 5);
  CHECK(cfg.aggregate == AggregateMode::Normalized);
  CHECK(cfg.beta_acc == BetaAccuracy::PerLabel);
  CHECK_FALSE(cfg.warm_start);
  CHECK(cfg.standardize);
  CHECK(cfg.parallel_workers == 1);
  REQUIRE(cfg.data.synthetic);
  CHECK(cfg.data.synthetic->labels[1].stddev == std::vector<double>{1, 0.5});
  CHECK(cfg.data.synthetic->labels[0].stddev == std::vector<double>{1, 1});
  CHECK(cfg.data.synthetic->labels[2].pool_size == 60);
  CHECK(cfg.data.synthetic->labels[0].pool_size == 100);

  const ClientConfig& u1 = cfg.clients[0];
  CHECK(u1.train.learning_rate == 0.01);
  CHECK(u1.train.max_epochs == 5);
  CHECK(u1.arch_at(1).hidden.size() == 1);
  CHECK(u1.arch_at(2).hidden.empty());
  CHECK(u1.plan.base_counts == std::vector<std::size_t>{20, 20});

  const ClientConfig& u2 = cfg.clients[1];
  CHECK(u2.labels == LabelSet{LabelId{1}, LabelId{2}});
  CHECK(u2.train.max_epochs == 2);
  CHECK(u2.train.learning_rate == 0.01);
  CHECK(u2.plan.base_counts == std::vector<std::size_t>{5, 15});
  CHECK(u2.plan.count_overrides.at(2) == std::vector<std::size_t>{3, 3});
  CHECK(u2.plan.skew.at(1) == std::vector<double>{2, 1});
  CHECK(u2.arch_at(1).hidden.front().activation == Activation::Relu);
}

TEST_CASE("config errors name the offending key") {
  json doc = base_config();
  doc["clients"][1]["arch_schedule"] = json::parse(R"([{"from_iteration": 1, "hidden": []}])");
  REQUIRE(error_of(doc).empty());

  auto with = [&](auto&& edit) {
    json d = doc;
    edit(d);
    return error_of(d);
  };
  CHECK(with([](json& d) { d["colour"] = 1; }).find("colour") != std::string::npos);
  CHECK(with([](json& d) { d["clients"][0]["lables"] = 1; }).find("clients[0].lables") != std::string::npos);
  CHECK(with([](json& d) { d["iterations"] = 0; }).find("iterations") != std::string::npos);
  CHECK(with([](json& d) { d["iterations"] = "two"; }).find("iterations") != std::string::npos);
  CHECK(with([](json& d) { d["aggregate"] = "mean"; }).find("aggregate") != std::string::npos);
  CHECK(with([](json& d) { d["clients"][0]["labels"] = {"a", "z"}; }).find("clients[0].labels") != std::string::npos);
  CHECK(with([](json& d) { d["clients"][0]["arch_schedule"][0]["hidden"][0]["activation"] = "tanh"; })
            .find("activation") != std::string::npos);
  CHECK(with([](json& d) { d["clients"][0]["arch_schedule"][0]["from_iteration"] = 2; }).find("from_iteration") !=
        std::string::npos);
  CHECK(with([](json& d) { d["train"]["learning_rate"] = -1; }).find("learning_rate") != std::string::npos);
  CHECK(with([](json& d) { d["clients"][0]["id"] = "u2"; }).find("duplicate") != std::string::npos);
  CHECK(with([](json& d) { d["clients"].erase(0); }).find("not claimed") != std::string::npos);
  CHECK(with([](json& d) { d["data"]["synthetic"]["distributions"]["a"]["mean"] = {0}; }).find("synthetic") !=
        std::string::npos);
  CHECK(with([](json& d) { d["data"]["public_csv"] = "x.csv"; }).find("data") != std::string::npos);
  CHECK(with([](json& d) { d["clients"][1]["skew"][0]["multipliers"]["a"] = 1; }).find("multipliers") !=
        std::string::npos);
  CHECK(!with([](json& d) { d["random_skew"] = 2.0; }).empty());
  CHECK(!error_of(json::array()).empty());

  try {
    parse_config_text("{not json");
    FAIL("expected ConfigInvalid");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ConfigInvalid);
  }
  CHECK(kind_of([] { parse_config("/nonexistent/config.json"); }) == ErrorKind::ConfigInvalid);
}

TEST_CASE("csv data sources resolve against the config directory") {
  json doc = base_config();
  doc["clients"][1]["arch_schedule"] = json::parse(R"([{"from_iteration": 1, "hidden": []}])");
  doc["data"] = {{"public_csv", "pub.csv"}, {"pool_csv", "sub/pool.csv"}};
  const ExperimentConfig cfg = parse_config_text(doc.dump(), "/data/run");
  CHECK(cfg.data.public_csv == std::filesystem::path("/data/run/pub.csv"));
  CHECK(cfg.data.pool_csv == std::filesystem::path("/data/run/sub/pool.csv"));
  CHECK_FALSE(cfg.data.synthetic);
}

TEST_CASE("shipped configs parse") {
  for (const char* name : {"table1.json", "smoke.json"}) {
    CAPTURE(name);
    CHECK_NOTHROW(parse_config(std::filesystem::path(FEDSCORE_SOURCE_DIR) / "configs" / name));
  }
  const GenDataSpec g = parse_gen_data_spec(std::filesystem::path(FEDSCORE_SOURCE_DIR) / "configs/gen_data_spec.json");
  CHECK(g.label_space.size() == 3);
  CHECK(g.synthetic.labels[2].pool_size == 50);
}
