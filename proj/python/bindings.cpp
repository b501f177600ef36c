// Python bindings: corpus loading, anonymization, relation derivation,
// cascade training and inference, evaluation, order enumeration and the
// backend conformance suite. Reports cross the boundary as plain dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "clincascade/anonymizer.hpp"
#include "clincascade/backend_client.hpp"
#include "clincascade/cascade.hpp"
#include "clincascade/cli.hpp"
#include "clincascade/corpus.hpp"
#include "clincascade/error.hpp"
#include "clincascade/eval.hpp"
#include "clincascade/ontology.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace clincascade;

namespace {

py::object to_python(const nlohmann::json& j) {
    switch (j.type()) {
        case nlohmann::json::value_t::null:
            return py::none();
        case nlohmann::json::value_t::boolean:
            return py::bool_(j.get<bool>());
        case nlohmann::json::value_t::number_integer:
            return py::int_(j.get<std::int64_t>());
        case nlohmann::json::value_t::number_unsigned:
            return py::int_(j.get<std::uint64_t>());
        case nlohmann::json::value_t::number_float:
            return py::float_(j.get<double>());
        case nlohmann::json::value_t::string:
            return py::str(j.get<std::string>());
        case nlohmann::json::value_t::array: {
            py::list out;
            for (const auto& v : j) out.append(to_python(v));
            return out;
        }
        default: {
            py::dict out;
            for (const auto& [k, v] : j.items()) out[py::str(k)] = to_python(v);
            return out;
        }
    }
}

py::dict report_dict(const corpus::Report& r) {
    py::dict d;
    d["id"] = r.id;
    d["text"] = r.text;
    d["pathology"] = r.pathology;
    for (const auto& [rel, value] : r.relations) d[py::str(std::string(to_string(rel)))] = value;
    return d;
}

py::list corpus_list(const corpus::Corpus& c) {
    py::list out;
    for (const auto& r : c) out.append(report_dict(r));
    return out;
}

corpus::Corpus corpus_from(const py::iterable& rows) {
    std::vector<corpus::Report> reports;
    for (const auto& item : rows) {
        const auto d = item.cast<py::dict>();
        corpus::Report r;
        r.id = d["id"].cast<std::string>();
        r.text = d["text"].cast<std::string>();
        r.pathology = d["pathology"].cast<std::string>();
        for (const Relation rel : kAllRelations) {
            const std::string key(to_string(rel));
            if (d.contains(key) && !d[key.c_str()].is_none()) r.relations[rel] = d[key.c_str()].cast<std::string>();
        }
        reports.push_back(std::move(r));
    }
    return corpus::Corpus(std::move(reports));
}

py::dict prediction_dict(const classifier::PredictionResult& p) {
    py::dict probs;
    for (std::size_t i = 0; i < p.labels().size(); ++i) probs[py::str(p.labels()[i])] = p.probabilities()[i];
    py::dict d;
    d["ranking"] = p.top_k(p.labels().size());
    d["probs"] = probs;
    return d;
}

classifier::Hyperparams hyperparams(std::size_t batch_size, double lr, std::size_t epochs, double l2,
                                    std::uint64_t seed) {
    classifier::Hyperparams hp;
    hp.batch_size = batch_size;
    hp.learning_rate = lr;
    hp.epochs = epochs;
    hp.l2 = l2;
    hp.seed = seed;
    hp.validate();
    return hp;
}

classifier::BackendSpec backend_spec(const std::optional<std::vector<std::string>>& command) {
    return command ? classifier::BackendSpec::external(*command) : classifier::BackendSpec::builtin();
}

std::map<Relation, std::string> relation_map(const std::optional<std::map<std::string, std::string>>& given) {
    std::map<Relation, std::string> out;
    if (!given) return out;
    for (const auto& [k, v] : *given) {
        const auto rel = parse_relation(k);
        if (!rel) throw Error(ErrorKind::validation, "python", "infer", "unknown relation '" + k + "'");
        out[*rel] = v;
    }
    return out;
}

class Pipeline {
public:
    explicit Pipeline(cascade::CascadePipeline p) : p_(std::move(p)) {}

    std::string order() const { return p_.order_string(); }

    py::dict infer(const std::string& text, const std::string& mode,
                   const std::optional<std::map<std::string, std::string>>& oracle) const {
        const auto known = relation_map(oracle);
        const auto r = cascade::infer_detailed(p_, text, cascade::parse_mode(mode), oracle ? &known : nullptr);
        auto d = prediction_dict(r.pathology);
        py::list stages;
        for (const auto& s : r.stages) stages.append(s.top1());
        d["stages"] = stages;
        return d;
    }

    py::object evaluate(const py::iterable& rows, const std::string& mode, std::size_t k) const {
        return to_python(cascade::evaluate_pipeline(p_, corpus_from(rows), cascade::parse_mode(mode), k).to_json());
    }

    void save(const fs::path& dir) const { cascade::save_pipeline(p_, dir); }

private:
    cascade::CascadePipeline p_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Relation-cascade clinical text classification toolkit";
    m.attr("__version__") = CLINCASCADE_VERSION;

    // Leaked on purpose: the type must outlive interpreter teardown.
    static py::handle error_type = py::exception<Error>(m, "ClincascadeError").release();
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object instance = error_type(e.what());
            instance.attr("kind") = to_string(e.kind());
            instance.attr("module") = e.module();
            instance.attr("operation") = e.operation();
            instance.attr("hint") = e.hint();
            PyErr_SetObject(error_type.ptr(), instance.ptr());
        }
    });

    m.def("load_corpus", [](const fs::path& path) { return corpus_list(corpus::load_corpus(path)); }, py::arg("path"),
          "Read a JSONL or CSV corpus into a list of report dicts.");
    m.def("save_corpus", [](const py::iterable& rows, const fs::path& path) { corpus::save_corpus(corpus_from(rows), path); },
          py::arg("reports"), py::arg("path"));
    m.def(
        "stratified_split",
        [](const py::iterable& rows, std::vector<double> fractions, std::uint64_t seed) {
            py::list out;
            for (const auto& part : corpus::stratified_split(corpus_from(rows), {std::move(fractions), seed, "pathology"})) {
                out.append(corpus_list(part));
            }
            return out;
        },
        py::arg("reports"), py::arg("fractions") = std::vector<double>{0.8, 0.2}, py::arg("seed") = 0);
    m.def(
        "generate_synthetic",
        [](const fs::path& relations, std::size_t n_per_class, double noise, std::uint64_t seed, std::size_t classes) {
            auto table = ontology::load_relation_table(relations);
            if (classes > 0) table = table.head(classes);
            return corpus_list(corpus::generate_synthetic(table, n_per_class, noise, seed));
        },
        py::arg("relations"), py::arg("n_per_class") = 40, py::arg("noise") = 0.3, py::arg("seed") = 0,
        py::arg("classes") = 0);

    m.def("strip_numeric", &anonymizer::strip_numeric, py::arg("text"));
    m.def(
        "anonymize",
        [](const py::iterable& rows, const fs::path& rules) {
            const auto [out, report] = anonymizer::anonymize(corpus_from(rows), anonymizer::load_rules(rules));
            return py::make_tuple(corpus_list(out), to_python(nlohmann::json::parse(report.to_json())));
        },
        py::arg("reports"), py::arg("rules"), "Strip digits and mask names; returns (reports, audit).");
    m.def(
        "mask_text",
        [](const std::string& text, const fs::path& rules) {
            return anonymizer::mask_entities(text, anonymizer::load_rules(rules)).text;
        },
        py::arg("text"), py::arg("rules"));

    m.def(
        "severity_from_flags",
        [](const std::vector<std::string>& names) {
            ontology::FlagSet flags;
            for (const auto& n : names) {
                const auto f = ontology::parse_icd10_flag(n);
                if (!f) throw Error(ErrorKind::validation, "python", "severity_from_flags", "unknown flag '" + n + "'");
                flags.insert(*f);
            }
            return std::string(ontology::severity_from_flags(flags));
        },
        py::arg("flags"));
    m.def(
        "derive_relations",
        [](const std::vector<std::string>& labels, const fs::path& translations, const fs::path& umls,
           const fs::path& snomed, const fs::path& icd10) {
            const std::vector<ontology::OntologySnapshot> snaps = {
                ontology::load_snapshot(umls), ontology::load_snapshot(snomed), ontology::load_snapshot(icd10)};
            const auto d = ontology::derive_relations(labels, ontology::load_translation_map(translations), snaps);
            py::dict table;
            for (const auto& disease : d.table.diseases()) {
                const auto& row = d.table.at(disease);
                py::dict r;
                r["type"] = row.type;
                r["severity"] = row.severity;
                r["site"] = row.site;
                table[py::str(disease)] = r;
            }
            py::list unresolved;
            for (const auto& u : d.unresolved) {
                py::dict r;
                r["label"] = u.label;
                r["english_name"] = u.english_name;
                r["reason"] = u.reason;
                unresolved.append(r);
            }
            return py::make_tuple(table, unresolved);
        },
        py::arg("labels"), py::arg("translations"), py::arg("umls"), py::arg("snomed"), py::arg("icd10"));

    m.def(
        "enumerate_orders",
        [](const std::vector<std::string>& names) {
            std::vector<Relation> rels;
            for (const auto& n : names) {
                const auto r = parse_relation(n);
                if (!r) throw Error(ErrorKind::validation, "python", "enumerate_orders", "unknown relation '" + n + "'");
                rels.push_back(*r);
            }
            std::vector<std::string> out;
            for (const auto& o : cascade::enumerate_orders(rels)) out.push_back(o.to_string());
            return out;
        },
        py::arg("relations") = std::vector<std::string>{"type", "severity", "site"});

    py::class_<Pipeline>(m, "Pipeline")
        .def_property_readonly("order", &Pipeline::order, "Stage order such as type>site>severity, or vanilla.")
        .def("infer", &Pipeline::infer, py::arg("text"), py::arg("mode") = "predictive",
             py::arg("oracle_relations") = std::nullopt)
        .def("evaluate", &Pipeline::evaluate, py::arg("reports"), py::arg("mode") = "predictive", py::arg("k") = 2)
        .def("save", &Pipeline::save, py::arg("directory"))
        .def_static("load", [](const fs::path& dir) { return Pipeline(cascade::load_pipeline(dir)); }, py::arg("directory"));

    m.def(
        "train_cascade",
        [](const py::iterable& rows, const std::string& order, std::size_t batch_size, double lr, std::size_t epochs,
           double l2, std::uint64_t seed, std::optional<std::vector<std::string>> backend_command) {
            const auto train = corpus_from(rows);
            const auto hp = hyperparams(batch_size, lr, epochs, l2, seed);
            const auto backend = backend_spec(backend_command);
            py::gil_scoped_release release;
            if (order == "vanilla") return Pipeline(cascade::train_vanilla(train, backend, hp));
            return Pipeline(cascade::train_cascade(train, cascade::CascadeOrder::parse(order), backend, hp));
        },
        py::arg("reports"), py::arg("order") = "type>site>severity", py::arg("batch_size") = 64,
        py::arg("learning_rate") = 0.001, py::arg("epochs") = 10, py::arg("l2") = 0.0, py::arg("seed") = 0,
        py::arg("backend_command") = std::nullopt, "Teacher-forced cascade training; order 'vanilla' trains text only.");

    m.def(
        "evaluate",
        [](const std::vector<std::string>& truths, const std::vector<std::map<std::string, double>>& predictions,
           std::size_t k, const std::string& macro_over) {
            std::vector<classifier::PredictionResult> preds;
            for (const auto& p : predictions) {
                std::vector<std::string> labels;
                std::vector<double> probs;
                for (const auto& [l, v] : p) {
                    labels.push_back(l);
                    probs.push_back(v);
                }
                preds.emplace_back(std::move(labels), std::move(probs));
            }
            eval::MacroAverage avg = eval::MacroAverage::truth;
            if (macro_over == "union") avg = eval::MacroAverage::union_labels;
            else if (macro_over != "truth") {
                throw Error(ErrorKind::validation, "python", "evaluate", "macro_over must be 'truth' or 'union'");
            }
            return to_python(eval::evaluate(truths, preds, k, avg).to_json());
        },
        py::arg("truths"), py::arg("predictions"), py::arg("k") = 2, py::arg("macro_over") = "truth",
        "Score label->probability maps against gold labels.");

    m.def(
        "run_conformance",
        [](const std::vector<std::string>& command) {
            py::list out;
            for (const auto& c : backend::run_conformance(command)) {
                py::dict d;
                d["name"] = c.name;
                d["passed"] = c.passed;
                d["detail"] = c.detail;
                out.append(d);
            }
            return out;
        },
        py::arg("command"), "Drive a model server through the protocol checks.");

    m.def(
        "cli",
        [](std::vector<std::string> args) {
            args.insert(args.begin(), "clincascade");
            std::vector<const char*> argv;
            for (const auto& a : args) argv.push_back(a.c_str());
            std::ostringstream out, err;
            const int status = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
            return py::make_tuple(status, out.str(), err.str());
        },
        py::arg("args"), "Run a CLI command in-process; returns (status, stdout, stderr).");
}
