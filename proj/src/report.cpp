#include "fedscore/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fedscore {
namespace {

using ojson = nlohmann::ordered_json;

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

ojson label_values(const LabelSpace& space, const LabelValues& values) {
  ojson out = ojson::object();
  for (const auto& [label, v] : values) out[space.name(label)] = v;
  return out;
}

ojson label_names(const LabelSpace& space, const LabelSet& labels) {
  ojson out = ojson::array();
  for (auto l : labels) out.push_back(space.name(l));
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write '" + path.string() + "'");
  out << content;
  out.close();
  if (!out) throw Error(ErrorKind::IoError, "failed writing '" + path.string() + "'");
}

}  // namespace

std::string serialize_report(const ExperimentReport& report) {
  const LabelSpace& space = report.label_space;
  ojson doc;
  doc["format"] = "fedscore-report/1";
  doc["labels"] = space.names();
  doc["iterations"] = report.iterations;
  doc["master_seed"] = report.master_seed;
  doc["aggregate"] = std::string(to_string(report.aggregate));
  doc["beta_acc"] = std::string(to_string(report.beta_acc));
  doc["public_size"] = report.public_size;

  ojson clients = ojson::array();
  for (std::size_t m = 0; m < report.client_ids.size(); ++m) {
    clients.push_back({{"id", report.client_ids[m]}, {"labels", label_names(space, report.client_labels[m])}});
  }
  doc["clients"] = clients;

  ojson records = ojson::array();
  for (const auto& r : report.records) {
    ojson counts = ojson::object();
    const LabelSet& labels = report.client_labels.at(r.client);
    for (std::size_t k = 0; k < r.shard_counts.size(); ++k) counts[space.name(labels[k])] = r.shard_counts[k];
    ojson rec;
    rec["iteration"] = r.iteration;
    rec["client"] = r.client_id;
    rec["arch"] = r.arch;
    rec["alpha"] = r.alpha;
    rec["shard_size"] = r.shard_size;
    rec["shard_counts"] = counts;
    rec["epochs_run"] = r.epochs_run;
    rec["final_train_loss"] = r.final_train_loss;
    rec["local_update_accuracy"] = r.local_update_accuracy;
    rec["global_update_accuracy"] = r.global_update_accuracy;
    rec["betas"] = label_values(space, r.betas);
    rec["parameter_count"] = r.parameter_count;
    rec["score_payload_bytes"] = r.score_payload_bytes;
    rec["weight_payload_bytes"] = r.weight_payload_bytes;
    rec["payload_ratio"] = static_cast<double>(r.score_payload_bytes) / static_cast<double>(r.weight_payload_bytes);
    records.push_back(std::move(rec));
  }
  doc["records"] = records;

  ojson iterations = ojson::array();
  for (const auto& it : report.iteration_records) {
    iterations.push_back(
        {{"iteration", it.iteration}, {"participants", it.participants}, {"global_accuracy", it.global_accuracy}});
  }
  doc["global"] = iterations;

  ojson reshuffles = ojson::array();
  for (const auto& e : report.reshuffles) {
    reshuffles.push_back({{"iteration", e.iteration},
                          {"client", report.client_ids.at(e.client)},
                          {"label", space.name(e.label)},
                          {"generation", e.generation}});
  }
  doc["reshuffles"] = reshuffles;

  const SummaryTable table = summarize(report);
  ojson summary = ojson::array();
  for (const auto& u : table.users) {
    summary.push_back({{"user", u.user},
                       {"local_mean", u.local_mean},
                       {"global_mean", u.global_mean},
                       {"increase", u.increase}});
  }
  doc["summary"] = {{"users", summary},
                    {"average",
                     {{"local_mean", table.average.local_mean},
                      {"global_mean", table.average.global_mean},
                      {"increase", table.average.increase}}}};
  return doc.dump(2) + "\n";
}

ExperimentReport parse_report(const std::string& text) {
  try {
    const ojson doc = ojson::parse(text);
    ExperimentReport report;
    report.label_space = LabelSpace(doc.at("labels").get<std::vector<std::string>>());
    const LabelSpace& space = report.label_space;
    report.iterations = doc.at("iterations").get<int>();
    report.master_seed = doc.at("master_seed").get<std::uint64_t>();
    report.aggregate = parse_aggregate_mode(doc.at("aggregate").get<std::string>());
    report.beta_acc = parse_beta_accuracy(doc.at("beta_acc").get<std::string>());
    report.public_size = doc.at("public_size").get<std::size_t>();
    std::map<std::string, std::size_t> client_index;
    for (const auto& c : doc.at("clients")) {
      client_index[c.at("id").get<std::string>()] = report.client_ids.size();
      report.client_ids.push_back(c.at("id").get<std::string>());
      report.client_labels.push_back(space.resolve(c.at("labels").get<std::vector<std::string>>()));
    }
    for (const auto& r : doc.at("records")) {
      ClientRecord rec;
      rec.iteration = r.at("iteration").get<int>();
      rec.client_id = r.at("client").get<std::string>();
      rec.client = client_index.at(rec.client_id);
      rec.arch = r.at("arch").get<std::string>();
      rec.alpha = r.at("alpha").get<double>();
      rec.shard_size = r.at("shard_size").get<std::size_t>();
      for (auto l : report.client_labels[rec.client]) {
        rec.shard_counts.push_back(r.at("shard_counts").at(space.name(l)).get<std::size_t>());
      }
      rec.epochs_run = r.at("epochs_run").get<int>();
      rec.final_train_loss = r.at("final_train_loss").get<double>();
      rec.local_update_accuracy = r.at("local_update_accuracy").get<double>();
      rec.global_update_accuracy = r.at("global_update_accuracy").get<double>();
      for (const auto& item : r.at("betas").items()) rec.betas[space.index(item.key())] = item.value().get<double>();
      rec.parameter_count = r.at("parameter_count").get<std::size_t>();
      rec.score_payload_bytes = r.at("score_payload_bytes").get<std::size_t>();
      rec.weight_payload_bytes = r.at("weight_payload_bytes").get<std::size_t>();
      report.records.push_back(std::move(rec));
    }
    for (const auto& g : doc.at("global")) {
      report.iteration_records.push_back(IterationRecord{g.at("iteration").get<int>(),
                                                         g.at("participants").get<std::size_t>(),
                                                         g.at("global_accuracy").get<double>()});
    }
    for (const auto& e : doc.at("reshuffles")) {
      report.reshuffles.push_back(ReshuffleEvent{e.at("iteration").get<int>(),
                                                 client_index.at(e.at("client").get<std::string>()),
                                                 space.index(e.at("label").get<std::string>()),
                                                 e.at("generation").get<std::size_t>()});
    }
    return report;
  } catch (const ojson::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("malformed report: ") + e.what());
  } catch (const std::out_of_range& e) {
    throw Error(ErrorKind::ParseError, std::string("malformed report: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorKind::ParseError, "malformed report: " + e.message());
  }
}

ExperimentReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_report(buf.str());
}

std::string accuracy_csv(const ExperimentReport& report) {
  std::string out = "iteration,client,local_acc,global_acc\n";
  for (const auto& r : report.records) {
    out += std::to_string(r.iteration) + ',' + r.client_id + ',' + fixed6(r.local_update_accuracy) + ',' +
           fixed6(r.global_update_accuracy) + '\n';
  }
  return out;
}

std::string summary_csv(const SummaryTable& table) {
  std::string out = "user,local_mean,global_mean,increase\n";
  auto row = [&](const UserSummary& u) {
    out += u.user + ',' + fixed6(u.local_mean) + ',' + fixed6(u.global_mean) + ',' + fixed6(u.increase) + '\n';
  };
  for (const auto& u : table.users) row(u);
  if (!table.users.empty()) row(table.average);
  return out;
}

std::string global_accuracy_csv(const ExperimentReport& report) {
  std::string out = "iteration,global_accuracy\n";
  for (const auto& it : report.iteration_records) {
    out += std::to_string(it.iteration) + ',' + fixed6(it.global_accuracy) + '\n';
  }
  return out;
}

std::string payload_csv(const ExperimentReport& report) {
  std::string out = "iteration,client,score_payload_bytes,weight_payload_bytes,ratio\n";
  for (const auto& r : report.records) {
    out += std::to_string(r.iteration) + ',' + r.client_id + ',' + std::to_string(r.score_payload_bytes) + ',' +
           std::to_string(r.weight_payload_bytes) + ',' +
           fixed6(static_cast<double>(r.score_payload_bytes) / static_cast<double>(r.weight_payload_bytes)) + '\n';
  }
  return out;
}

std::string timing_csv(const ExperimentReport& report) {
  std::string out = "iteration,client,epochs_run,train_seconds\n";
  for (const auto& r : report.records) {
    out += std::to_string(r.iteration) + ',' + r.client_id + ',' + std::to_string(r.epochs_run) + ',' +
           fixed6(r.train_seconds) + '\n';
  }
  return out;
}

void emit_report(const ExperimentReport& report, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create '" + out_dir.string() + "': " + ec.message());
  write_file(out_dir / "report.json", serialize_report(report));
  write_file(out_dir / "accuracy.csv", accuracy_csv(report));
  write_file(out_dir / "summary.csv", summary_csv(summarize(report)));
  write_file(out_dir / "global_accuracy.csv", global_accuracy_csv(report));
  write_file(out_dir / "payload.csv", payload_csv(report));
  write_file(out_dir / "timing.csv", timing_csv(report));
}

}  // namespace fedscore
