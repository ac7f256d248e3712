"""Deterministic stand-in scorer.

Produces seeded pseudo-random next-token distributions and classifier
logits from a hash of the request, so runs are reproducible without any
trained model.  Usable in-process (:class:`StubScorer`) or as a wire
scorer: ``python -m dlgkit.stub_scorer --vocab 32 --seed 0`` speaks the
version-1 JSON-lines protocol on stdin/stdout.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import random
import sys

from .encoding import EncodedSample

PROTOCOL_VERSION = 1


def _hash_seed(seed: int, payload: tuple) -> int:
    digest = hashlib.sha256(repr((seed, payload)).encode()).digest()
    return int.from_bytes(digest[:8], "little")


class StubScorer:
    """Seeded pseudo-random scorer; ``mode='uniform'`` gives flat outputs."""

    def __init__(self, vocab_size: int, seed: int = 0, mode: str = "random"):
        if mode not in ("random", "uniform"):
            raise ValueError(f"unknown stub mode {mode!r}")
        self.vocab_size = vocab_size
        self.seed = seed
        self.mode = mode

    def _logprobs_for(self, tokens: tuple[int, ...]) -> list[float]:
        if self.mode == "uniform":
            return [-math.log(self.vocab_size)] * self.vocab_size
        rng = random.Random(_hash_seed(self.seed, tokens))
        weights = [rng.random() + 1e-6 for _ in range(self.vocab_size)]
        total = sum(weights)
        return [math.log(w / total) for w in weights]

    def logprobs(self, sample: EncodedSample) -> list[float]:
        return self._logprobs_for(tuple(sample.token_ids))

    def classify(self, samples: list[EncodedSample]) -> list[float]:
        if self.mode == "uniform":
            return [0.0] * len(samples)
        return [random.Random(_hash_seed(self.seed ^ 0x5F, tuple(s.token_ids))).gauss(0, 1)
                for s in samples]


def serve(scorer: StubScorer, stdin=None, stdout=None):
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
            if request.get("version") != PROTOCOL_VERSION:
                raise ValueError(f"unsupported protocol version "
                                 f"{request.get('version')!r}")
            op = request.get("op")
            if op == "logprobs":
                tokens = tuple(request["sample"]["token_ids"])
                response = {"version": PROTOCOL_VERSION, "ok": True,
                            "logprobs": scorer._logprobs_for(tokens)}
            elif op == "classify":
                samples = request["samples"]
                logits = [
                    0.0 if scorer.mode == "uniform" else
                    random.Random(_hash_seed(scorer.seed ^ 0x5F,
                                             tuple(s["token_ids"]))).gauss(0, 1)
                    for s in samples]
                response = {"version": PROTOCOL_VERSION, "ok": True,
                            "logits": logits}
            else:
                raise ValueError(f"unknown op {op!r}")
        except Exception as exc:  # stay alive on malformed requests
            response = {"version": PROTOCOL_VERSION, "ok": False,
                        "error": str(exc)}
        stdout.write(json.dumps(response) + "\n")
        stdout.flush()


def main(argv=None):
    parser = argparse.ArgumentParser(description="deterministic stub scorer")
    parser.add_argument("--vocab", type=int, default=32)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--mode", choices=("random", "uniform"), default="random")
    args = parser.parse_args(argv)
    serve(StubScorer(args.vocab, args.seed, args.mode))


if __name__ == "__main__":
    main()
