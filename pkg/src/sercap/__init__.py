"""Desk-scale audio-captioning sandbox: a teacher-forced transformer
captioner trained with label-smoothed cross-entropy plus a sentence
embedding regression loss, constrained beam-search decoding, and a
captioning metric suite, all exercised on a synthetic corpus."""

__version__ = "0.1.0"
