#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "spe/dataset.hpp"
#include "spe/error.hpp"
#include "spe/features.hpp"
#include "spe/harness.hpp"
#include "spe/metrics.hpp"
#include "spe/models.hpp"
#include "spe/pairing.hpp"
#include "spe/synthetic.hpp"

namespace py = pybind11;
using namespace spe;

namespace {

using PairTuple = std::tuple<std::string, std::string, int>;

py::dict item_dict(const BacklogItem& item) {
  py::dict d;
  d["id"] = item.id;
  d["title"] = item.title;
  d["description"] = item.description;
  d["story_point"] = item.story_point ? py::cast(item.sp()) : py::none();
  d["split"] = std::string(to_string(item.split));
  return d;
}

std::vector<ComparativePair> to_pairs(const std::vector<PairTuple>& tuples) {
  std::vector<ComparativePair> out;
  out.reserve(tuples.size());
  for (const auto& [a, b, y] : tuples) out.push_back({a, b, y});
  return out;
}

std::vector<PairTuple> from_pairs(const std::vector<ComparativePair>& pairs) {
  std::vector<PairTuple> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.emplace_back(p.a, p.b, p.y);
  return out;
}

EmbeddingMatrix to_matrix(const std::map<std::string, std::vector<double>>& rows) {
  if (rows.empty()) throw ValidationError("no embeddings given");
  EmbeddingMatrix m(rows.begin()->second.size());
  for (const auto& [id, v] : rows) m.add(id, v);
  return m;
}

std::map<std::string, std::vector<double>> from_matrix(const EmbeddingMatrix& m) {
  std::map<std::string, std::vector<double>> out;
  for (const auto& id : m.ids()) {
    const auto row = m.row(id);
    out.emplace(id, std::vector<double>(row.begin(), row.end()));
  }
  return out;
}

std::vector<BacklogItem> select_splits(const ProjectDataset& d, const std::vector<std::string>& splits) {
  std::vector<BacklogItem> out;
  for (const auto& item : d.items()) {
    if (!item.labeled()) continue;
    for (const auto& s : splits) {
      if (item.split == parse_split(s)) {
        out.push_back(item);
        break;
      }
    }
  }
  return out;
}

py::dict model_dict(const TrainedModel& m) {
  py::dict d;
  d["w"] = m.head.w;
  d["b"] = m.head.b;
  d["train_loss"] = m.train_loss;
  d["validation_loss"] = m.validation_loss;
  d["best_epoch"] = m.best_epoch;
  d["config"] = train_config_to_json(m.config);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the spe package";

  static py::exception<Error> base(m, "SpeError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<NotFoundError>(m, "NotFoundError", base.ptr());
  py::register_exception<UndefinedCorrelation>(m, "UndefinedCorrelation", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  m.def("tokenize", &tokenize, py::arg("text"));
  m.def("fnv1a64", &fnv1a64, py::arg("text"));

  m.def("fractional_ranks", [](const std::vector<double>& v) { return fractional_ranks(v); }, py::arg("values"));
  m.def("pearson", [](const std::vector<double>& p, const std::vector<double>& t) { return pearson(p, t); },
        py::arg("pred"), py::arg("truth"));
  m.def("spearman", [](const std::vector<double>& p, const std::vector<double>& t) { return spearman(p, t); },
        py::arg("pred"), py::arg("truth"));
  m.def("mae", [](const std::vector<double>& p, const std::vector<double>& t) { return mae(p, t); },
        py::arg("pred"), py::arg("truth"));

  py::class_<ProjectDataset>(m, "Dataset")
      .def_property_readonly("name", &ProjectDataset::name)
      .def("__len__", &ProjectDataset::size)
      .def("items", [](const ProjectDataset& d) {
        py::list out;
        for (const auto& item : d.items()) out.append(item_dict(item));
        return out;
      })
      .def("summary", [](const ProjectDataset& d) {
        const auto s = summarize(d);
        py::dict out;
        out["size"] = s.n;
        out["labeled"] = s.labeled;
        out["min_sp"] = s.min_sp.value();
        out["max_sp"] = s.max_sp.value();
        out["train"] = s.train;
        out["validation"] = s.validation;
        out["test"] = s.test;
        out["unassigned"] = s.unassigned;
        return out;
      })
      .def("save", [](const ProjectDataset& d, const std::string& path) { save_project(d, path, format_from_path(path)); },
           py::arg("path"));

  m.def("load_project", [](const std::string& path) { return load_project(path); }, py::arg("path"));
  m.def("item_text", [](const std::string& title, const std::string& description) {
    BacklogItem item;
    item.title = title;
    item.description = description;
    return item_text(item);
  }, py::arg("title"), py::arg("description") = "");

  m.def("simulate_pairs", [](const ProjectDataset& d, std::size_t k, std::uint64_t seed,
                             const std::vector<std::string>& splits) {
    const auto set = simulate_pairs(select_splits(d, splits), k, seed);
    py::dict out;
    out["pairs"] = from_pairs(set.pairs);
    out["k"] = set.k;
    out["dropped"] = set.dropped;
    out["shortfall"] = set.shortfall;
    return out;
  }, py::arg("dataset"), py::arg("k"), py::arg("seed"), py::arg("splits") = std::vector<std::string>{"train"});

  py::class_<HashedTfidfModel>(m, "HashedTfidf")
      .def_static("fit", [](const std::vector<std::string>& corpus, std::size_t dim) {
        return HashedTfidfModel::fit(corpus, dim);
      }, py::arg("corpus"), py::arg("dim") = kDefaultFeatureDim)
      .def_property_readonly("dim", &HashedTfidfModel::dim)
      .def("embed", &HashedTfidfModel::embed, py::arg("text"))
      .def("embed_dataset", [](const HashedTfidfModel& model, const ProjectDataset& d) {
        return from_matrix(embed_items(model, d.items()));
      }, py::arg("dataset"))
      .def("to_json", &HashedTfidfModel::to_json);

  m.def("make_synthetic", [](std::size_t n, std::size_t dim, std::size_t levels, std::uint64_t seed) {
    auto p = make_synthetic_project(SyntheticSpec{n, dim, levels, seed});
    py::dict out;
    out["embeddings"] = from_matrix(p.embeddings);
    out["w_star"] = p.w_star;
    out["true_scores"] = p.true_scores;
    out["dataset"] = py::cast(std::move(p.dataset));
    return out;
  }, py::arg("n") = 500, py::arg("dim") = 16, py::arg("levels") = 8, py::arg("seed") = SyntheticSpec{}.seed);

  m.def("default_train_config", [](const std::string& model) {
    switch (parse_model_kind(model)) {
      case ModelKind::regression: return train_config_to_json(TrainConfig::regression_defaults());
      case ModelKind::comparative_noval: return train_config_to_json(TrainConfig::comparative_defaults(false));
      case ModelKind::comparative_val: return train_config_to_json(TrainConfig::comparative_defaults(true));
      case ModelKind::svm_comparative: return train_config_to_json(TrainConfig::svm_defaults());
    }
    return std::string();
  }, py::arg("model"));

  m.def("train_comparative", [](const std::vector<PairTuple>& pairs,
                                const std::map<std::string, std::vector<double>>& embeddings,
                                const std::vector<PairTuple>& val_pairs, const std::string& overrides) {
    const auto emb = to_matrix(embeddings);
    const auto train = to_pairs(pairs), val = to_pairs(val_pairs);
    const auto config = apply_train_config_overrides(TrainConfig::comparative_defaults(!val.empty()), overrides);
    TrainedModel model;
    {
      py::gil_scoped_release release;
      model = train_comparative(train, emb, val, config);
    }
    return model_dict(model);
  }, py::arg("pairs"), py::arg("embeddings"), py::arg("val_pairs") = std::vector<PairTuple>{},
     py::arg("config") = "");

  m.def("score", [](const std::vector<double>& w, double b, const std::vector<double>& x) {
    return score(ScoringHead(w, b), x);
  }, py::arg("w"), py::arg("b"), py::arg("x"));

  m.def("run_experiment_json", [](const std::string& config_json) {
    const auto config = ExperimentConfig::from_json(config_json);
    py::gil_scoped_release release;
    return run_experiment(config).to_json();
  }, py::arg("config_json"));

  m.def("render_report_json", [](const std::string& report_json, const std::string& format, bool with_reference) {
    return render_report(ExperimentReport::from_json(report_json), parse_report_format(format), with_reference);
  }, py::arg("report_json"), py::arg("format") = "markdown", py::arg("with_reference") = true);
}
