#include "hltmc/model_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "hltmc/error.hpp"

namespace hltmc {
namespace {

using nlohmann::json;

constexpr const char* kFormat = "hltmc-model";
constexpr int kVersion = 1;

}  // namespace

std::string model_to_json(const HltmcModel& model) {
  const auto& s = model.structure();
  const auto& p = model.params();
  json doc;
  doc["format"] = kFormat;
  doc["version"] = kVersion;
  doc["sigma_floor"] = model.sigma_floor();
  doc["words"] = s.words;

  json nodes = json::array();
  json cpts = json::object();
  for (std::size_t i = 0; i < s.nodes.size(); ++i) {
    const Node& n = s.nodes[i];
    json node;
    node["id"] = n.id;
    node["parent"] = n.parent < 0 ? json(nullptr) : json(s.nodes[n.parent].id);
    node["kind"] = n.kind == NodeKind::latent ? "latent" : "leaf";
    node["level"] = n.level;
    if (n.kind == NodeKind::leaf) node["word"] = s.words[n.word];
    nodes.push_back(std::move(node));
    if (n.kind == NodeKind::latent && n.parent >= 0) {
      cpts[n.id] = {{p.cpts[i][0][0], p.cpts[i][0][1]}, {p.cpts[i][1][0], p.cpts[i][1][1]}};
    }
  }
  doc["nodes"] = std::move(nodes);
  doc["root_prior"] = p.root_prior;
  doc["cpts"] = std::move(cpts);

  json leaves = json::array();
  for (std::size_t w = 0; w < p.leaves.size(); ++w) {
    leaves.push_back({{"word", s.words[w]}, {"mu", p.leaves[w].mu}, {"sigma", p.leaves[w].sigma}});
  }
  doc["leaves"] = std::move(leaves);
  return doc.dump(1) + "\n";
}

HltmcModel model_from_json(const std::string& text, const std::string& where) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(where, 0, e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != kFormat) throw ParseError(where, 0, "not an hltmc model");
    if (doc.at("version").get<int>() != kVersion) throw ParseError(where, 0, "unsupported model version");

    TreeStructure s;
    s.words = doc.at("words").get<std::vector<std::string>>();
    std::unordered_map<std::string, int> word_index;
    for (std::size_t w = 0; w < s.words.size(); ++w) word_index.emplace(s.words[w], static_cast<int>(w));

    const auto& nodes = doc.at("nodes");
    std::unordered_map<std::string, int> node_index;
    for (const auto& jn : nodes) {
      Node n;
      n.id = jn.at("id").get<std::string>();
      const auto kind = jn.at("kind").get<std::string>();
      if (kind != "latent" && kind != "leaf") throw ParseError(where, 0, "node " + n.id + " has unknown kind " + kind);
      n.kind = kind == "latent" ? NodeKind::latent : NodeKind::leaf;
      n.level = jn.at("level").get<int>();
      if (n.kind == NodeKind::leaf) {
        const auto word = jn.at("word").get<std::string>();
        const auto it = word_index.find(word);
        if (it == word_index.end()) throw ParseError(where, 0, "leaf " + n.id + " references unknown word '" + word + "'");
        n.word = it->second;
      }
      node_index.emplace(n.id, static_cast<int>(s.nodes.size()));
      s.nodes.push_back(std::move(n));
    }
    for (std::size_t i = 0; i < s.nodes.size(); ++i) {
      const auto& jp = nodes[i].at("parent");
      if (jp.is_null()) continue;
      const auto it = node_index.find(jp.get<std::string>());
      if (it == node_index.end()) throw ParseError(where, 0, "node " + s.nodes[i].id + " has unknown parent");
      s.nodes[i].parent = it->second;
    }

    ParamSet p;
    p.root_prior = doc.at("root_prior").get<double>();
    p.cpts.assign(s.nodes.size(), kUniformCpt);
    for (const auto& [id, table] : doc.at("cpts").items()) {
      const auto it = node_index.find(id);
      if (it == node_index.end()) throw ParseError(where, 0, "cpt for unknown node " + id);
      Cpt cpt{};
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) cpt[a][b] = table.at(a).at(b).get<double>();
        const double sum = cpt[a][0] + cpt[a][1];
        if (std::abs(sum - 1.0) > 1e-15 && sum > 0.0) {
          cpt[a][0] /= sum;
          cpt[a][1] /= sum;
        }
      }
      p.cpts[it->second] = cpt;
    }
    p.leaves.resize(s.words.size());
    for (const auto& jl : doc.at("leaves")) {
      const auto word = jl.at("word").get<std::string>();
      const auto it = word_index.find(word);
      if (it == word_index.end()) throw ParseError(where, 0, "parameters for unknown word '" + word + "'");
      p.leaves[it->second].mu = jl.at("mu").get<std::array<double, 2>>();
      p.leaves[it->second].sigma = jl.at("sigma").get<std::array<double, 2>>();
    }
    return HltmcModel(std::move(s), std::move(p), doc.at("sigma_floor").get<double>());
  } catch (const json::exception& e) {
    throw ParseError(where, 0, e.what());
  }
}

void save_model(const HltmcModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << model_to_json(model);
}

HltmcModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return model_from_json(buffer.str(), path.string());
}

}  // namespace hltmc
