#include "gnnlink_cli/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "gnnlink/csv.hpp"
#include "gnnlink/encode.hpp"
#include "gnnlink/error.hpp"
#include "gnnlink/importance.hpp"
#include "gnnlink/ingest.hpp"
#include "gnnlink/metrics.hpp"
#include "gnnlink/network.hpp"
#include "gnnlink/sage.hpp"
#include "gnnlink/synth.hpp"
#include "gnnlink/text.hpp"

namespace gnnlink::cli {

namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path, std::string_view what) {
  if (path.empty()) throw ConfigError("missing required input: --" + std::string(what));
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + std::string(what) + " file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class ArtifactWriter {
 public:
  ArtifactWriter(std::string_view command, const RunConfig& config, std::ostream& log)
      : command_(command), config_(config), log_(log), hash_(config.hash()) {
    fs::create_directories(config.out_dir);
  }

  /// CSV-family files carry a '#' provenance line, which every reader skips.
  void csv(const std::string& name, const std::string& body) { write(name, "# " + provenance(' ') + "\n" + body); }

  /// key: value report; provenance keys first.
  void report(const std::string& name, const std::string& body) {
    std::string head = "version: " + std::string(kVersion) + "\ncommand: " + command_ + "\nconfig_hash: " + hash_ +
                       "\nseed: " + std::to_string(config_.seed) + "\n";
    write(name, head + body);
  }

  void raw(const std::string& name, const std::string& body) { write(name, body); }

  const std::string& config_hash() const { return hash_; }

 private:
  std::string provenance(char sep) const {
    return "gnnlink " + std::string(kVersion) + sep + "command=" + command_ + sep + "config_hash=" + hash_ + sep +
           "seed=" + std::to_string(config_.seed);
  }

  void write(const std::string& name, const std::string& body) {
    const fs::path path = fs::path(config_.out_dir) / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << body;
    log_ << "wrote " << path.string() << "\n";
  }

  std::string command_;
  const RunConfig& config_;
  std::ostream& log_;
  std::string hash_;
};

std::string kv(const std::string& key, const std::string& value) { return key + ": " + value + "\n"; }

struct Dataset {
  AttributeSchema schema;
  std::vector<ConsiderationRecord> records;
  std::vector<ProductRecord> products;
  std::string notes;  // parse warnings as report lines
};

AttributeSchema load_schema(const RunConfig& c) { return parse_schema(read_file(c.schema, "schema")); }

std::vector<ProductRecord> load_products(const RunConfig& c, const AttributeSchema& schema, std::string& notes) {
  auto parsed = parse_products(read_file(c.products, "products"), schema);
  notes += kv("product_rows_rejected", std::to_string(parsed.rejections.size()));
  return std::move(parsed.products);
}

Dataset load_dataset(const RunConfig& c, std::ostream& log) {
  Dataset d;
  d.schema = load_schema(c);
  d.products = load_products(c, d.schema, d.notes);
  auto survey = parse_survey(read_file(c.survey, "survey"));
  for (const auto& r : survey.rejections) log << "survey line " << r.line << " rejected: " << r.reason << "\n";
  d.notes += kv("survey_rows_rejected", std::to_string(survey.rejections.size()));
  d.notes += kv("duplicate_considerations_dropped", std::to_string(survey.duplicate_warnings));
  d.notes += kv("oversize_consideration_sets", std::to_string(survey.oversize_warnings));
  d.records = std::move(survey.records);

  const auto summary = validate_dataset(d.records, d.products);
  if (!summary.valid) {
    std::string ids;
    for (const auto& id : summary.unknown_ids) ids += (ids.empty() ? "" : ", ") + id;
    throw DataError("survey references products missing from the product table: " + ids);
  }
  return d;
}

SageConfig sage_config(const RunConfig& c, std::size_t input_dim) {
  SageConfig s;
  s.input_dim = input_dim;
  s.hidden_dims = c.hidden;
  s.sample_sizes = c.samples;
  s.dropout = c.dropout;
  s.edge_operator = edge_operator_from_string(c.edge_operator);
  return s;
}

std::string meta_or_throw(const SageModel& model, const std::string& key) {
  auto it = model.metadata().find(key);
  if (it == model.metadata().end()) throw DataError("model lacks metadata '" + key + "'");
  return it->second;
}

std::string network_report(const CoConsiderationNetwork& net) {
  std::string out;
  out += kv("nodes", std::to_string(net.size()));
  out += kv("edges", std::to_string(net.edge_count()));
  out += kv("density", format_decimal(net.size() >= 2 ? network_density(net) : 0.0, 6));
  out += kv("mean_degree", format_decimal(mean_degree(net), 6));
  return out;
}

int cmd_build_network(const RunConfig& c, std::ostream& log) {
  ArtifactWriter out("build-network", c, log);
  const auto d = load_dataset(c, log);
  const auto net = build_network(d.records, d.products, c.cutoff);
  out.csv("edges.csv", write_edge_list(net));
  out.raw("nodes.txt", write_node_manifest(net));
  out.report("network_report.txt", kv("cutoff", std::to_string(c.cutoff)) + network_report(net) + d.notes);
  return kSuccess;
}

int cmd_train(const RunConfig& c, std::ostream& log) {
  ArtifactWriter out("train", c, log);
  const auto d = load_dataset(c, log);
  const auto net = build_network(d.records, d.products, c.cutoff);
  const auto codec = fit_codec(d.products, d.schema);
  const auto encoded = encode_features(codec, d.products);
  const auto split = split_edges(net, c.test_fraction, c.seed);

  TrainConfig tc;
  tc.epochs = c.epochs;
  tc.batch_size = c.batch_size;
  tc.learning_rate = c.learning_rate;
  tc.seed = c.seed;
  tc.track_held_out_auc = true;
  auto init = SageModel::initialize(sage_config(c, codec.dimension()), c.seed);
  log << "training on " << split.train.size() << " pairs (" << split.test.size() << " held out), D="
      << codec.dimension() << "\n";
  auto result = train(std::move(init), encoded.matrix, split, tc);

  auto& meta = result.model.metadata();
  meta["schema_hash"] = codec.schema_hash();
  meta["seed"] = std::to_string(c.seed);
  meta["config_hash"] = out.config_hash();
  meta["version"] = std::string(kVersion);
  meta["cutoff"] = std::to_string(c.cutoff);
  meta["test_fraction"] = format_hex(c.test_fraction);
  meta["train_mean_degree"] = format_hex(mean_degree(split.training));
  meta["train_density"] = format_hex(network_density(split.training));
  meta["knn_k"] = std::to_string(choose_k(split.training));

  std::vector<NodePair> pairs;
  std::vector<int> labels;
  for (const auto& s : split.test) {
    pairs.emplace_back(s.u, s.v);
    labels.push_back(s.label);
  }
  const auto probs = predict_links(result.model, encoded.matrix, split.training, pairs, c.seed);
  const auto report = evaluate(labels, probs, c.threshold);

  std::string trace = "epoch,loss,held_out_auc\n";
  for (std::size_t e = 0; e < result.trace.epoch_loss.size(); ++e)
    trace += std::to_string(e + 1) + "," + format_decimal(result.trace.epoch_loss[e], 8) + "," +
             format_decimal(result.trace.held_out_auc[e], 6) + "\n";

  out.raw("codec.txt", codec.serialize());
  out.raw("model.txt", result.model.serialize());
  out.csv("loss_trace.csv", trace);
  out.csv("roc.csv", format_roc_points(report.roc));
  out.report("eval_report.txt", kv("split", "held_out") + network_report(split.training) +
                                    kv("knn_k", meta["knn_k"]) + format_eval_report(report) + d.notes);
  log << "held-out AUC " << format_decimal(report.roc.auc, 4) << "\n";
  return kSuccess;
}

int cmd_predict(const RunConfig& c, std::ostream& log) {
  ArtifactWriter out("predict", c, log);
  const auto model = SageModel::deserialize(read_file(c.model, "model"));
  const auto codec = FeatureCodec::deserialize(read_file(c.codec, "codec"));
  const auto schema = load_schema(c);
  if (schema.hash() != codec.schema_hash() || meta_or_throw(model, "schema_hash") != codec.schema_hash())
    throw DataError("schema hash mismatch between codec, model, and product schema; refusing to predict");

  std::string notes;
  const auto products = load_products(c, schema, notes);
  const auto encoded = encode_features(codec, products);
  notes += kv("unseen_categories", std::to_string(encoded.unseen_categories));

  // Target-year adjacency: an explicit edge list, else the KNN approximation. The
  // training network is never consulted.
  CoConsiderationNetwork graph;
  if (!c.adjacency.empty()) {
    const auto given = read_network(read_file(c.manifest, "manifest"), read_file(c.adjacency, "adjacency"));
    std::vector<NodePair> edges;
    for (auto [a, b] : given.edges()) {
      auto ia = encoded.matrix.index_of(given.node_ids()[a]);
      auto ib = encoded.matrix.index_of(given.node_ids()[b]);
      if (!ia || !ib) throw DataError("adjacency references a node absent from the product file");
      edges.emplace_back(static_cast<NodeIndex>(*ia), static_cast<NodeIndex>(*ib));
    }
    graph = CoConsiderationNetwork(encoded.matrix.node_ids(), edges);
    notes += kv("adjacency", "given");
  } else {
    std::size_t k = c.knn_k;
    if (k == 0) {
      auto it = model.metadata().find("knn_k");
      if (it == model.metadata().end())
        throw ConfigError("no adjacency given and no K available: pass --adjacency or --knn_k");
      k = static_cast<std::size_t>(parse_integer(it->second));
    }
    if (k >= products.size()) k = products.size() - 1;
    graph = knn_adjacency(encoded.matrix, k);
    notes += kv("adjacency", "knn") + kv("knn_k", std::to_string(k));
    out.csv("approx_edges.csv", write_edge_list(graph));
  }

  std::vector<NodePair> pairs;
  for (NodeIndex a = 0; a < graph.size(); ++a)
    for (NodeIndex b = a + 1; b < graph.size(); ++b) pairs.emplace_back(a, b);
  const auto probs = predict_links(model, encoded.matrix, graph, pairs, c.seed);

  std::string table = "u,v,probability\n";
  const auto& ids = graph.node_ids();
  for (std::size_t i = 0; i < pairs.size(); ++i)
    table += csv::join({ids[pairs[i].first], ids[pairs[i].second], format_shortest(probs[i])}) + "\n";
  out.csv("predictions.csv", table);
  out.report("predict_report.txt", kv("pairs", std::to_string(pairs.size())) + network_report(graph) + notes);
  return kSuccess;
}

int cmd_evaluate(const RunConfig& c, std::ostream& log) {
  ArtifactWriter out("evaluate", c, log);
  std::set<std::pair<std::string, std::string>> truth;
  auto key = [](std::string a, std::string b) { return a < b ? std::pair{a, b} : std::pair{b, a}; };
  std::set<std::string> known;
  if (!c.manifest.empty())
    for (const auto& row : csv::parse(read_file(c.manifest, "manifest"))) known.insert(row.fields.at(0));
  const auto truth_rows = csv::parse(read_file(c.truth, "truth"));
  for (std::size_t r = 0; r < truth_rows.size(); ++r) {
    const auto& f = truth_rows[r].fields;
    if (r == 0 && f.size() >= 2 && f[0] == "u" && f[1] == "v") continue;
    if (f.size() < 2) throw ParseError("truth: expected 'u,v'", truth_rows[r].line, "u");
    if (!known.empty() && (!known.count(f[0]) || !known.count(f[1])))
      throw DataError("truth references a node absent from the manifest at line " + std::to_string(truth_rows[r].line));
    truth.insert(key(f[0], f[1]));
  }

  std::vector<int> labels;
  std::vector<double> probs;
  const auto rows = csv::parse(read_file(c.predictions, "predictions"));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    if (r == 0 && f.size() == 3 && f[0] == "u") continue;
    if (f.size() != 3) throw ParseError("predictions: expected 'u,v,probability'", rows[r].line, "probability");
    double p = 0.0;
    try {
      p = parse_double(f[2]);
    } catch (const std::invalid_argument&) {
      throw ParseError("predictions: bad probability at line " + std::to_string(rows[r].line), rows[r].line,
                       "probability");
    }
    labels.push_back(truth.count(key(f[0], f[1])) ? 1 : 0);
    probs.push_back(p);
  }
  const auto report = evaluate(labels, probs, c.threshold);
  out.csv("roc.csv", format_roc_points(report.roc));
  out.report("eval_report.txt", format_eval_report(report));
  log << "AUC " << format_decimal(report.roc.auc, 4) << "\n";
  return kSuccess;
}

int cmd_importance(const RunConfig& c, std::ostream& log) {
  ArtifactWriter out("importance", c, log);
  const auto model = SageModel::deserialize(read_file(c.model, "model"));
  const auto codec = FeatureCodec::deserialize(read_file(c.codec, "codec"));
  const auto d = load_dataset(c, log);
  if (d.schema.hash() != codec.schema_hash() || meta_or_throw(model, "schema_hash") != codec.schema_hash())
    throw DataError("schema hash mismatch between codec, model, and product schema");
  if (c.importance_data != "train" && c.importance_data != "test")
    throw ConfigError("importance_data must be 'train' or 'test'");

  const auto net = build_network(d.records, d.products, c.cutoff);
  const auto encoded = encode_features(codec, d.products);
  const auto split = split_edges(net, c.test_fraction, c.seed);
  const auto& pairs = c.importance_data == "train" ? split.train : split.test;

  ImportanceOptions opts;
  opts.repeats = c.repeats;
  opts.seed = c.seed;
  opts.sampling_seed = c.seed;
  const auto report = permutation_importance(model, encoded.matrix, codec.blocks(), split.training, pairs, opts);
  out.csv("importance.csv", format_importance_table(report));
  out.report("importance_report.txt", kv("data", c.importance_data) + kv("pairs", std::to_string(pairs.size())) +
                                          kv("score", report.score_kind) +
                                          kv("reference_score", format_decimal(report.reference_score, 6)) +
                                          kv("repeats", std::to_string(report.repeats)));
  return kSuccess;
}

int cmd_synth(const RunConfig& c, std::ostream& log) {
  ArtifactWriter out("synth", c, log);
  auto sc = SynthConfig::market_preset();
  sc.products = c.synth_products;
  sc.customers = c.synth_customers;
  sc.overlap = c.synth_overlap;
  if (c.synth_temperature >= 0.0) sc.temperature = c.synth_temperature;
  sc.seed = c.seed;
  const auto market = generate_market(sc);

  out.csv("schema.csv", write_schema(market.schema));
  out.csv("year1_products.csv", write_products(market.year1.products, market.schema));
  out.csv("year1_survey.csv", write_survey(market.year1.records));
  out.csv("year2_products.csv", write_products(market.year2.products, market.schema));
  out.csv("year2_survey.csv", write_survey(market.year2.records));
  out.csv("year1_truth.csv", write_truth(market.year1.products, market.rule));
  out.csv("year2_truth.csv", write_truth(market.year2.products, market.rule));
  std::string fresh;
  for (const auto& id : market.new_products) fresh += csv::escape(id) + "\n";
  out.raw("year2_new_products.txt", fresh);

  const auto net1 = build_network(market.year1.records, market.year1.products, c.cutoff);
  const auto net2 = build_network(market.year2.records, market.year2.products, c.cutoff);
  out.csv("year1_edges.csv", write_edge_list(net1));
  out.csv("year2_edges.csv", write_edge_list(net2));
  out.report("synth_report.txt", kv("products_year1", std::to_string(market.year1.products.size())) +
                                     kv("products_year2", std::to_string(market.year2.products.size())) +
                                     kv("new_products_year2", std::to_string(market.new_products.size())) +
                                     kv("customers", std::to_string(sc.customers)) +
                                     kv("temperature", format_decimal(sc.temperature, 4)) +
                                     kv("density_year1", format_decimal(network_density(net1), 6)) +
                                     kv("density_year2", format_decimal(network_density(net2), 6)));
  return kSuccess;
}

template <class T>
std::string join_values(const std::vector<T>& v) {
  std::string out;
  for (const auto& x : v) out += (out.empty() ? "" : " ") + std::to_string(x);
  return out;
}

}  // namespace

std::string RunConfig::hash() const {
  std::string s;
  auto add = [&](std::string_view k, const std::string& v) {
    s += k;
    s += '=';
    s += v;
    s += '\n';
  };
  add("survey", survey);
  add("products", products);
  add("schema", schema);
  add("model", model);
  add("codec", codec);
  add("adjacency", adjacency);
  add("manifest", manifest);
  add("predictions", predictions);
  add("truth", truth);
  add("cutoff", std::to_string(cutoff));
  add("test_fraction", format_hex(test_fraction));
  add("epochs", std::to_string(epochs));
  add("batch_size", std::to_string(batch_size));
  add("learning_rate", format_hex(learning_rate));
  add("dropout", format_hex(dropout));
  add("hidden", join_values(hidden));
  add("samples", join_values(samples));
  add("edge_operator", edge_operator);
  add("knn_k", std::to_string(knn_k));
  add("threshold", format_hex(threshold));
  add("repeats", std::to_string(repeats));
  add("importance_data", importance_data);
  add("seed", std::to_string(seed));
  add("synth_products", std::to_string(synth_products));
  add("synth_customers", std::to_string(synth_customers));
  add("synth_temperature", format_hex(synth_temperature));
  add("synth_overlap", format_hex(synth_overlap));
  return hash_hex(s);
}

int run_command(std::string_view command, const RunConfig& config, std::ostream& log) {
  try {
    if (command == "build-network") return cmd_build_network(config, log);
    if (command == "train") return cmd_train(config, log);
    if (command == "predict") return cmd_predict(config, log);
    if (command == "evaluate") return cmd_evaluate(config, log);
    if (command == "importance") return cmd_importance(config, log);
    if (command == "synth") return cmd_synth(config, log);
    log << "error: unknown command '" << command << "'\n";
    return kUsageError;
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const DataError& e) {
    log << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const NumericError& e) {
    log << "numeric error: " << e.what() << "\n";
    return kNumericError;
  } catch (const fs::filesystem_error& e) {
    log << "error: " << e.what() << "\n";
    return kUsageError;
  }
}

ParsedCommandLine parse_command_line(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  ParsedCommandLine parsed;
  RunConfig& c = parsed.config;

  CLI::App app{"gnnlink: product co-consideration link prediction with GraphSAGE"};
  app.set_version_flag("--version", std::string(kVersion));
  app.set_config("--config", "", "flat key = value config file; flags override its keys");
  app.require_subcommand(1);
  app.fallthrough();

  app.add_option("--survey", c.survey, "survey CSV (customer_id,consider_1,...)");
  app.add_option("--products", c.products, "product CSV (product_id,<attributes>)");
  app.add_option("--schema", c.schema, "schema file (name,kind per line)");
  app.add_option("--model", c.model, "serialized model");
  app.add_option("--codec", c.codec, "serialized feature codec");
  app.add_option("--adjacency", c.adjacency, "edge list u,v for the target network");
  app.add_option("--manifest", c.manifest, "node-id manifest");
  app.add_option("--predictions", c.predictions, "predictions CSV u,v,probability");
  app.add_option("--truth", c.truth, "truth edge list u,v");
  app.add_option("--out_dir", c.out_dir, "output directory")->capture_default_str();
  app.add_option("--cutoff", c.cutoff, "co-consideration count needed for a link")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--test_fraction", c.test_fraction, "held-out edge fraction")->capture_default_str();
  app.add_option("--epochs", c.epochs)->capture_default_str();
  app.add_option("--batch_size", c.batch_size)->capture_default_str();
  app.add_option("--learning_rate", c.learning_rate)->capture_default_str();
  app.add_option("--dropout", c.dropout)->capture_default_str();
  app.add_option("--hidden", c.hidden, "hidden size per layer")->capture_default_str();
  app.add_option("--samples", c.samples, "neighbor samples per hop")->capture_default_str();
  app.add_option("--edge_operator", c.edge_operator)
      ->check(CLI::IsMember({"inner_product", "hadamard", "average", "concat"}))
      ->capture_default_str();
  app.add_option("--knn_k", c.knn_k, "KNN neighbors for unseen networks (0 = auto)")->capture_default_str();
  app.add_option("--threshold", c.threshold)->capture_default_str();
  app.add_option("--repeats", c.repeats, "permutations per attribute")->capture_default_str();
  app.add_option("--importance_data", c.importance_data)->check(CLI::IsMember({"train", "test"}))->capture_default_str();
  app.add_option("--seed", c.seed)->capture_default_str();
  app.add_option("--synth_products", c.synth_products)->capture_default_str();
  app.add_option("--synth_customers", c.synth_customers)->capture_default_str();
  app.add_option("--synth_temperature", c.synth_temperature, "softmax temperature (< 0 = preset)")->capture_default_str();
  app.add_option("--synth_overlap", c.synth_overlap)->capture_default_str();

  app.add_subcommand("build-network", "build the co-consideration network and report its density");
  app.add_subcommand("train", "train GraphSAGE + link classifier on a held-out split");
  app.add_subcommand("predict", "score all pairs of a target-year product file");
  app.add_subcommand("evaluate", "evaluate predictions against a truth edge list");
  app.add_subcommand("importance", "permutation importance per attribute");
  app.add_subcommand("synth", "generate a planted synthetic market");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    parsed.exit_status = app.exit(e, out, err) == 0 ? kSuccess : kUsageError;
    return parsed;
  }
  parsed.command = app.get_subcommands().front()->get_name();
  return parsed;
}

}  // namespace gnnlink::cli
