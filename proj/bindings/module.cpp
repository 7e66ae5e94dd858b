// Python bindings for the hislm core library.
//
// The module exposes the main operations: tokenization (k-means, dedup, RVQ),
// cost models, the synthetic corpus, training, generation, and evaluation
// metrics. Matrices cross the boundary as numpy float32 arrays via the
// pybind11 Eigen caster.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "hislm/corpus.hpp"
#include "hislm/evalkit.hpp"
#include "hislm/infer.hpp"
#include "hislm/model.hpp"
#include "hislm/perf.hpp"
#include "hislm/serialize.hpp"
#include "hislm/tokenhub.hpp"
#include "hislm/trainer.hpp"

namespace py = pybind11;
using namespace hislm;

namespace {

ModelConfig model_config_from_json(const std::string& s) {
    return ModelConfig::from_json(nlohmann::json::parse(s));
}

TrainConfig train_config_from_json(const std::string& s) {
    return TrainConfig::from_json(nlohmann::json::parse(s));
}

}  // namespace

PYBIND11_MODULE(_hislm, m) {
    m.doc() = "Hierarchical speech language model core";

    // ---- tokenhub ----
    py::class_<FrameSeq>(m, "FrameSeq")
        .def(py::init([](const MatrixF& frames, double rate) {
                 return FrameSeq{frames, rate};
             }),
             py::arg("frames"), py::arg("frame_rate_hz") = 50.0)
        .def_readwrite("frames", &FrameSeq::frames)
        .def_readwrite("frame_rate_hz", &FrameSeq::frame_rate_hz)
        .def("__len__", [](const FrameSeq& f) { return static_cast<size_t>(f.size()); });

    py::class_<SemanticCodebook>(m, "SemanticCodebook")
        .def_readwrite("centroids", &SemanticCodebook::centroids)
        .def_property_readonly("vocab", [](const SemanticCodebook& c) { return c.vocab(); });

    py::class_<RvqCodebooks>(m, "RvqCodebooks")
        .def_readwrite("levels", &RvqCodebooks::levels)
        .def_property_readonly("depth", &RvqCodebooks::depth)
        .def_property_readonly("vocab", [](const RvqCodebooks& c) { return c.vocab(); });

    py::class_<AcousticGrid>(m, "AcousticGrid")
        .def(py::init([](std::vector<std::vector<int>> codes) {
                 return AcousticGrid{std::move(codes)};
             }),
             py::arg("codes") = std::vector<std::vector<int>>{})
        .def_readwrite("codes", &AcousticGrid::codes)
        .def("__len__", [](const AcousticGrid& g) { return g.codes.size(); })
        .def_property_readonly("depth", &AcousticGrid::depth);

    m.def("fit_kmeans", &fit_kmeans, py::arg("frames"), py::arg("n_clusters"),
          py::arg("iters") = 25, py::arg("seed") = 0);
    m.def("semantic_encode", &semantic_encode, py::arg("frames"), py::arg("codebook"));
    m.def("dedup", &dedup, py::arg("seq"));
    m.def("fit_rvq", &fit_rvq, py::arg("frames"), py::arg("depth"), py::arg("n_entries"),
          py::arg("iters") = 25, py::arg("seed") = 0);
    m.def("rvq_encode", &rvq_encode, py::arg("frames"), py::arg("codebooks"));
    m.def("rvq_decode", &rvq_decode, py::arg("grid"), py::arg("codebooks"),
          py::arg("frame_rate_hz") = 75.0);

    // ---- serialization ----
    py::class_<TokenRecord>(m, "TokenRecord")
        .def(py::init<>())
        .def_readwrite("semantic", &TokenRecord::semantic)
        .def_readwrite("acoustic", &TokenRecord::acoustic)
        .def_readwrite("content_id", &TokenRecord::content_id)
        .def_readwrite("speaker_id", &TokenRecord::speaker_id);

    m.def("save_codebooks", &save_codebooks, py::arg("codebooks"), py::arg("path"));
    m.def("load_codebooks", &load_codebooks, py::arg("path"));
    m.def("save_semantic_codebook", &save_semantic_codebook, py::arg("codebook"), py::arg("path"));
    m.def("load_semantic_codebook", &load_semantic_codebook, py::arg("path"));
    m.def("save_frames", &save_frames, py::arg("frames"), py::arg("path"));
    m.def("load_frames", &load_frames, py::arg("path"));
    m.def("save_token_records", &save_token_records, py::arg("records"), py::arg("path"));
    m.def("load_token_records", &load_token_records, py::arg("path"));

    // ---- perf ----
    m.def("attn_cost_flat", &attn_cost_flat, py::arg("n_layers"), py::arg("t2"), py::arg("depth"));
    m.def("attn_cost_hier", &attn_cost_hier, py::arg("n_global"), py::arg("n_local"),
          py::arg("t2"), py::arg("depth"));
    m.def("flops_flat", &flops_flat, py::arg("m"), py::arg("t2"), py::arg("depth"));
    m.def("flops_hier", &flops_hier, py::arg("m_global"), py::arg("m_local"), py::arg("t2"),
          py::arg("depth"));
    m.def("block_params", &block_params, py::arg("d"), py::arg("ffn"));

    // ---- corpus ----
    py::class_<SynthCorpusSpec>(m, "SynthCorpusSpec")
        .def(py::init<>())
        .def_readwrite("n_speakers", &SynthCorpusSpec::n_speakers)
        .def_readwrite("n_utterances", &SynthCorpusSpec::n_utterances)
        .def_readwrite("min_seconds", &SynthCorpusSpec::min_seconds)
        .def_readwrite("max_seconds", &SynthCorpusSpec::max_seconds)
        .def_readwrite("content_alphabet", &SynthCorpusSpec::content_alphabet)
        .def_readwrite("feature_dim", &SynthCorpusSpec::feature_dim)
        .def_readwrite("speaker_dims", &SynthCorpusSpec::speaker_dims)
        .def_readwrite("symbol_seconds", &SynthCorpusSpec::symbol_seconds)
        .def_readwrite("semantic_rate_hz", &SynthCorpusSpec::semantic_rate_hz)
        .def_readwrite("acoustic_rate_hz", &SynthCorpusSpec::acoustic_rate_hz)
        .def_readwrite("noise_level", &SynthCorpusSpec::noise_level)
        .def_readwrite("seed", &SynthCorpusSpec::seed);

    py::class_<SynthUtterance>(m, "SynthUtterance")
        .def_readonly("semantic_frames", &SynthUtterance::semantic_frames)
        .def_readonly("acoustic_frames", &SynthUtterance::acoustic_frames)
        .def_readonly("speaker_id", &SynthUtterance::speaker_id)
        .def_readonly("content_symbols", &SynthUtterance::content_symbols)
        .def_readonly("seconds", &SynthUtterance::seconds);

    py::class_<SynthCorpus>(m, "SynthCorpus")
        .def_readonly("spec", &SynthCorpus::spec)
        .def_readonly("content_embeddings", &SynthCorpus::content_embeddings)
        .def_readonly("speaker_offsets", &SynthCorpus::speaker_offsets)
        .def_readonly("utterances", &SynthCorpus::utterances);

    m.def("synth_corpus", &synth_corpus, py::arg("spec"));
    m.def("write_corpus", &write_corpus, py::arg("corpus"), py::arg("dir"));
    m.def("load_corpus", &load_corpus, py::arg("dir"));

    // ---- model / training ----
    py::class_<ModelConfig>(m, "ModelConfig")
        .def(py::init<>())
        .def_readwrite("n_layers_global", &ModelConfig::n_layers_global)
        .def_readwrite("n_layers_local", &ModelConfig::n_layers_local)
        .def_readwrite("d_global", &ModelConfig::d_global)
        .def_readwrite("d_local", &ModelConfig::d_local)
        .def_readwrite("heads_global", &ModelConfig::heads_global)
        .def_readwrite("heads_local", &ModelConfig::heads_local)
        .def_readwrite("ffn_global", &ModelConfig::ffn_global)
        .def_readwrite("ffn_local", &ModelConfig::ffn_local)
        .def_readwrite("n_semantic", &ModelConfig::n_semantic)
        .def_readwrite("n_acoustic", &ModelConfig::n_acoustic)
        .def_readwrite("depth", &ModelConfig::depth)
        .def_readwrite("max_t1", &ModelConfig::max_t1)
        .def_readwrite("max_t2", &ModelConfig::max_t2)
        .def_readwrite("drop_p", &ModelConfig::drop_p)
        .def_readwrite("label_smooth", &ModelConfig::label_smooth)
        .def("to_json", [](const ModelConfig& c) { return c.to_json().dump(); })
        .def_static("from_json", &model_config_from_json, py::arg("json_str"));

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("lr_base", &TrainConfig::lr_base)
        .def_readwrite("warmup_steps", &TrainConfig::warmup_steps)
        .def_readwrite("max_steps", &TrainConfig::max_steps)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("crop_seconds", &TrainConfig::crop_seconds)
        .def_readwrite("label_smooth", &TrainConfig::label_smooth)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("checkpoint_every", &TrainConfig::checkpoint_every)
        .def("to_json", [](const TrainConfig& c) { return c.to_json().dump(); })
        .def_static("from_json", &train_config_from_json, py::arg("json_str"));

    m.def("lr_schedule", &lr_schedule, py::arg("step"), py::arg("config"));

    m.def(
        "run_training",
        [](const std::vector<TokenRecord>& corpus, const ModelConfig& mcfg,
           const TrainConfig& tcfg, const std::string& checkpoint_path,
           const std::string& metrics_path) {
            TrainResult res = run_training(corpus, mcfg, tcfg, checkpoint_path, metrics_path);
            std::vector<std::tuple<long, double, double>> trace;
            trace.reserve(res.trace.size());
            for (const auto& s : res.trace)
                trace.emplace_back(s.step, s.lr, s.loss_total_per_token);
            return trace;
        },
        py::arg("corpus"), py::arg("model_config"), py::arg("train_config"),
        py::arg("checkpoint_path"), py::arg("metrics_path") = std::string(),
        "Runs the training loop; returns a list of (step, lr, loss_per_token).");

    // ---- inference ----
    py::class_<SamplingParams>(m, "SamplingParams")
        .def(py::init<>())
        .def_readwrite("temperature", &SamplingParams::temperature)
        .def_readwrite("top_k", &SamplingParams::top_k)
        .def_readwrite("max_semantic_len", &SamplingParams::max_semantic_len)
        .def_readwrite("max_acoustic_len", &SamplingParams::max_acoustic_len)
        .def_readwrite("seed", &SamplingParams::seed);

    py::class_<ParamsF>(m, "Params")
        .def(py::init([](const ModelConfig& cfg, uint64_t seed) {
                 ParamsF p;
                 p.init(cfg, seed);
                 return p;
             }),
             py::arg("config"), py::arg("seed"))
        .def_property_readonly("config", [](const ParamsF& p) { return p.cfg; });

    py::class_<Example>(m, "Example")
        .def(py::init<>())
        .def_readwrite("semantic", &Example::semantic)
        .def_readwrite("acoustic", &Example::acoustic);

    py::class_<AdamState>(m, "AdamState")
        .def(py::init([](const ParamsF& params) {
                 AdamState s;
                 s.init(params);
                 return s;
             }),
             py::arg("params"));

    py::class_<Rng>(m, "Rng").def(py::init<uint64_t>(), py::arg("seed"));

    m.def(
        "train_step",
        [](ParamsF& params, const std::vector<Example>& batch, AdamState& opt,
           const TrainConfig& cfg, long step, Rng& drop_rng) {
            StepMetrics sm = train_step(params, batch, opt, cfg, step, drop_rng);
            return py::make_tuple(sm.lr, sm.loss_total_per_token, sm.loss_semantic_per_token,
                                  sm.loss_acoustic_per_token);
        },
        py::arg("params"), py::arg("batch"), py::arg("opt"), py::arg("config"), py::arg("step"),
        py::arg("drop_rng"));

    m.def(
        "load_params",
        [](const std::string& path) { return load_checkpoint(path).params; },
        py::arg("checkpoint_path"));
    m.def("generate_semantic", &generate_semantic, py::arg("params"), py::arg("prefix"),
          py::arg("sampling"), py::arg("use_cache") = true);
    m.def("generate_acoustic", &generate_acoustic, py::arg("params"), py::arg("semantic"),
          py::arg("prefix"), py::arg("sampling"), py::arg("use_cache") = true);
    m.def("speaker_transfer", &speaker_transfer, py::arg("params"), py::arg("semantic_prompt"),
          py::arg("semantic_target"), py::arg("acoustic_prompt"), py::arg("silence"),
          py::arg("sampling"), py::arg("use_cache") = true);
    m.def("acoustic_continuation", &acoustic_continuation, py::arg("params"),
          py::arg("semantic_target"), py::arg("prefix_3s"), py::arg("sampling"),
          py::arg("use_cache") = true);

    // ---- evalkit ----
    m.def("edit_distance", &edit_distance, py::arg("a"), py::arg("b"));
    m.def("edit_similarity", &edit_similarity, py::arg("a"), py::arg("b"));
    m.def("content_accuracy", &content_accuracy, py::arg("generated"), py::arg("target"),
          py::arg("semantic_codebook"), py::arg("rvq_codebooks"),
          py::arg("semantic_rate_hz") = 50.0, py::arg("acoustic_rate_hz") = 75.0);
}
