#ifndef MICROSTAT_TOPICFIT_JSON_HPP
#define MICROSTAT_TOPICFIT_JSON_HPP

// TopicFit bundle: aligned draws plus the source dataset, so the
// downstream subcommands (topics-diff, topics-ppc) need only this file.

#include <fstream>
#include <string>

#include <json.hpp>

#include "microstat/dataset_json.hpp"
#include "microstat/lda.hpp"

namespace microstat {

struct TopicFitBundle {
  TopicFit fit;
  Dataset data;
};

inline json topicfit_to_json(const TopicFit &fit, const Dataset &data) {
  json out;
  out["format"] = "microstat.topicfit";
  out["version"] = 1;
  out["n_topics"] = fit.n_topics;
  out["alpha"] = fit.alpha;
  out["gamma"] = fit.gamma;
  out["aligned"] = fit.aligned;
  out["alignment"] = fit.alignment;
  out["theta"] = fit.theta;
  out["beta"] = fit.beta;
  out["loglik"] = fit.loglik;
  out["dataset"] = dataset_to_json(data);
  return out;
}

inline TopicFitBundle topicfit_from_json(const json &in) {
  if (!in.is_object() || in.value("format", "") != "microstat.topicfit")
    throw data_error("fit json: missing format tag 'microstat.topicfit'");
  TopicFitBundle out;
  try {
    out.fit.n_topics = in.at("n_topics").get<int>();
    out.fit.alpha = in.at("alpha").get<double>();
    out.fit.gamma = in.at("gamma").get<double>();
    out.fit.aligned = in.value("aligned", false);
    out.fit.alignment =
        in.at("alignment").get<std::vector<std::vector<int>>>();
    out.fit.theta =
        in.at("theta")
            .get<std::vector<std::vector<std::vector<double>>>>();
    out.fit.beta =
        in.at("beta").get<std::vector<std::vector<std::vector<double>>>>();
    out.fit.loglik = in.at("loglik").get<std::vector<std::vector<double>>>();
    out.data = dataset_from_json(in.at("dataset"));
  } catch (const json::exception &e) {
    throw data_error(std::string("fit json: ") + e.what());
  }
  out.fit.taxa_ids = out.data.counts.taxa_ids;
  out.fit.specimen_ids = out.data.counts.specimen_ids;
  return out;
}

inline void save_topicfit(const TopicFit &fit, const Dataset &data,
                          const std::string &path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write '" + path + "'");
  out << topicfit_to_json(fit, data).dump() << '\n';
}

inline TopicFitBundle load_topicfit(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot read '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception &e) {
    throw data_error("'" + path + "' is not valid JSON: " + e.what());
  }
  return topicfit_from_json(j);
}

} // namespace microstat

#endif
