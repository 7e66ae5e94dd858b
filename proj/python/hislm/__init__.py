"""Hierarchical speech language model: tokenization, training, generation."""

try:
    from . import _hislm as _core  # installed wheel layout
except ImportError:  # in-tree build with the extension directory on sys.path
    import _hislm as _core

_EXPORTS = [
    "AcousticGrid",
    "AdamState",
    "Example",
    "Rng",
    "train_step",
    "FrameSeq",
    "ModelConfig",
    "Params",
    "RvqCodebooks",
    "SamplingParams",
    "SemanticCodebook",
    "SynthCorpus",
    "SynthCorpusSpec",
    "SynthUtterance",
    "TokenRecord",
    "TrainConfig",
    "acoustic_continuation",
    "attn_cost_flat",
    "attn_cost_hier",
    "block_params",
    "content_accuracy",
    "dedup",
    "edit_distance",
    "edit_similarity",
    "fit_kmeans",
    "fit_rvq",
    "flops_flat",
    "flops_hier",
    "generate_acoustic",
    "generate_semantic",
    "load_codebooks",
    "load_corpus",
    "load_frames",
    "load_params",
    "load_semantic_codebook",
    "load_token_records",
    "lr_schedule",
    "run_training",
    "rvq_decode",
    "rvq_encode",
    "save_codebooks",
    "save_frames",
    "save_semantic_codebook",
    "save_token_records",
    "semantic_encode",
    "speaker_transfer",
    "synth_corpus",
    "write_corpus",
]

for _name in _EXPORTS:
    globals()[_name] = getattr(_core, _name)

__all__ = list(_EXPORTS)
