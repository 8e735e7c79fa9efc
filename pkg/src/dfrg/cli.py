"""Command-line interface: ``dfrg {mix,enhance,analyze,featurize,build-dataset,verify}``.

Exit codes: 0 success, 1 validation or usage error, 2 runtime failure.
Measured quantities go to JSON (sidecar files or stdout), never to logs.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path


from . import audio_io, dataset, dsp, features, masking, mixing, verify
from .errors import DfrgError, SegmentOutOfRange, UnsupportedFormat

log = logging.getLogger("dfrg")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _global_seed(args) -> int:
    if args.global_seed is not None:
        return args.global_seed
    return int(os.environ.get("DFRG_SEED", "0"))


def _dump(obj, path=None, compact=False) -> None:
    text = json.dumps(obj, sort_keys=True, separators=(",", ":") if compact else None, indent=None if compact else 2)
    if path is None:
        print(text)
    else:
        Path(path).write_text(text + "\n", encoding="utf-8")


def _prepare_mixture(args):
    """Load clean + noise and pick the noise segment. Returns (clean, noise, spec)."""
    for p in (args.clean, args.noise):
        if not Path(p).is_file():
            raise FileNotFoundError(f"no such file: {p}")
    clean = audio_io.read_wav(args.clean)
    noise = audio_io.read_wav(args.noise)
    if args.offset is not None:
        offset = args.offset
        seed = _global_seed(args) if args.seed is None else args.seed
    else:
        seed = args.seed if args.seed is not None else _global_seed(args)
        offset = mixing.pick_noise_segment(noise, len(clean), args.consumer, seed)
    spec = mixing.MixtureSpec(Path(args.clean).stem, Path(args.noise).stem, offset, args.snr, seed)
    return clean, noise, spec


def _add_mixture_args(p, snr_required=True):
    p.add_argument("clean", help="clean speech WAV (16 kHz mono PCM16)")
    p.add_argument("noise", help="noise WAV")
    p.add_argument("--snr", type=float, required=snr_required, help="target SNR in dB")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--offset", type=int, help="noise start sample")
    g.add_argument("--seed", type=int, help="seed for the random noise offset")
    p.add_argument("--consumer", default="asr_backend", choices=[c.value for c in mixing.Consumer])


def cmd_mix(args) -> int:
    clean, noise, spec = _prepare_mixture(args)
    y, n = mixing.mix(spec, clean, noise)
    clipped = audio_io.write_wav(y, args.out)
    _dump(
        {
            "clean": str(args.clean),
            "noise": str(args.noise),
            "noise_offset": spec.noise_offset,
            "seed": spec.seed,
            "target_snr_db": spec.snr_db,
            "achieved_snr_db": mixing.measure_snr(clean, n),
            "noise_gain": mixing.snr_scale(clean, noise.samples[spec.noise_offset:spec.noise_offset + len(clean)], spec.snr_db),
            "clip_count": clipped,
            "num_samples": len(y),
        },
        Path(args.out).with_suffix(".json"),
    )
    return EXIT_OK


def cmd_enhance(args) -> int:
    clean, noise, spec = _prepare_mixture(args)
    y, n = mixing.mix(spec, clean, noise)
    enhancer = masking.EnhancerSpec.parse(args.mask, seed=spec.seed)
    out = masking.enhance_utterance(y, enhancer, clean, n)
    clipped = audio_io.write_wav(out, args.out)
    _dump(
        {
            "enhancer": enhancer.to_dict(),
            "noise_offset": spec.noise_offset,
            "input_snr_db": mixing.measure_snr(clean, y.samples - clean.samples),
            "output_snr_db": mixing.measure_snr(clean, out.samples - clean.samples),
            "clip_count": clipped,
        },
        Path(args.out).with_suffix(".json"),
    )
    return EXIT_OK


def cmd_analyze(args) -> int:
    if args.snr is None:
        for p in (args.clean, args.noise):
            if not Path(p).is_file():
                raise FileNotFoundError(f"no such file: {p}")
        clean = audio_io.read_wav(args.clean)
        noise = audio_io.read_wav(args.noise)
        start = args.offset or 0
        if start + len(clean) > len(noise):
            raise SegmentOutOfRange("noise shorter than clean speech at this offset")
        n = audio_io.Waveform(noise.samples[start:start + len(clean)])
        seed = args.seed if args.seed is not None else _global_seed(args)
    else:
        clean, noise, spec = _prepare_mixture(args)
        _, n = mixing.mix(spec, clean, noise)
        seed = spec.seed
    s_spec = dsp.stft(clean, dsp.ENHANCEMENT)
    n_spec = dsp.stft(n, dsp.ENHANCEMENT)
    enhancer = masking.EnhancerSpec.parse(args.mask, seed=seed)
    m = enhancer.mask(s_spec, n_spec, s_spec + n_spec)
    report = masking.analyze_distortion(s_spec, n_spec, m, aligned=not args.complex).to_dict()
    report["mask"] = enhancer.to_dict()
    report["relative_distortion"] = report["distortion_energy"] / max(report["speech_energy"], 1e-300)
    if args.json:
        _dump(report, compact=True)
    else:
        for k in sorted(report):
            print(f"{k}: {report[k]}")
    return EXIT_OK


def cmd_featurize(args) -> int:
    w = audio_io.read_wav(args.input)
    f = features.featurize(w)
    audio_io.write_features(audio_io.FeatureFile(f.data), args.out)
    _dump({"frames": f.data.shape[0], "dim": f.data.shape[1], "cmn_applied": f.cmn_applied})
    return EXIT_OK


def _read_list(path, need_lengths: bool) -> list[dataset.CleanUtterance]:
    """One utterance per line: ``path``, ``id`` or ``id path``."""
    out = []
    base = Path(path).parent
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if len(parts) == 1:
            token = parts[0]
            utt_id, wav = (Path(token).stem, token) if token.lower().endswith(".wav") else (token, token)
        else:
            utt_id, wav = parts[0], parts[1]
        if not Path(wav).is_absolute() and not Path(wav).exists() and (base / wav).exists():
            wav = str(base / wav)
        n = dataset.wav_length(wav)
        if need_lengths and n is None:
            raise FileNotFoundError(f"clean utterance {utt_id!r}: cannot read {wav}")
        out.append(dataset.CleanUtterance(utt_id, wav, n))
    return out


def _noise_catalog(noise_dir) -> dict[str, dataset.NoiseSource]:
    if noise_dir is None:
        return {}
    d = Path(noise_dir)
    if not d.is_dir():
        raise FileNotFoundError(f"noise directory not found: {d}")
    return {
        p.stem: dataset.NoiseSource(p.stem, str(p), dataset.wav_length(p))
        for p in sorted(d.glob("*.wav"))
    }


def _ids(text) -> list[str]:
    return [t for t in (text or "").split(",") if t]


def cmd_build_dataset(args) -> int:
    catalog = _noise_catalog(args.noise_dir)
    need = not args.dry_run
    enhancer = None
    regime = dataset.Regime(args.regime)
    if regime is dataset.Regime.DISTORTION_INDEPENDENT:
        enhancer = masking.EnhancerSpec.parse(args.enhancer)
    spec = dataset.RegimeSpec(regime, _ids(args.train_noises), _ids(args.test_noises), enhancer=enhancer)
    seed = _global_seed(args)
    clean = _read_list(args.clean_list, need)
    validation = _read_list(args.validation_list, need) if args.validation_list else []
    entries = dataset.build_manifest(spec, clean, catalog, args.scale, seed, validation)
    if args.test_list:
        test_noises = spec.test_noises or tuple(sorted(catalog))
        entries += dataset.build_test_grid(
            _read_list(args.test_list, need), test_noises, spec.snr_set, catalog, regime, seed,
            enhancer=masking.EnhancerSpec.parse(args.eval_enhancer) if args.eval_enhancer else None,
        )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset.write_manifest(entries, out_dir / "manifest.jsonl")
    summary = {"regime": regime.value, "counts": dataset.count_by_split(entries), "dry_run": args.dry_run}
    if not args.dry_run:
        report = dataset.realize(entries, out_dir, catalog, args.mode, args.workers)
        audio_io._write_bytes(out_dir / "report.json", (report.to_json() + "\n").encode())
        summary["failed"] = len(report.failures)
    _dump(summary)
    if summary.get("failed"):
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_verify(args) -> int:
    results = verify.run(args.suite, seed=_global_seed(args))
    ok = all(c.passed for checks in results.values() for c in checks)
    _dump({"passed": ok, "suites": {k: [c.to_dict() for c in v] for k, v in results.items()}})
    return EXIT_OK if ok else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dfrg", description=__doc__.splitlines()[0])
    parser.add_argument("--global-seed", type=int, default=None, help="overrides $DFRG_SEED (default 0)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("mix", help="mix clean speech with noise at a target SNR")
    _add_mixture_args(p)
    p.add_argument("--out", required=True, help="output WAV; a .json sidecar is written next to it")
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("enhance", help="mix, then enhance with an oracle mask and noisy phase")
    _add_mixture_args(p)
    p.add_argument("--mask", default="irm", help="irm, psm, binary, one, zero or perturbed:LEVEL")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("analyze", help="distortion report for an oracle mask")
    _add_mixture_args(p, snr_required=False)
    p.add_argument("--mask", default="irm", help="irm, psm, binary, one, zero or perturbed:LEVEL")
    p.add_argument("--complex", action="store_true", help="use complex spectra instead of aligned magnitudes")
    p.add_argument("--json", action="store_true", help="print one JSON object")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("featurize", help="240-dim log-Mel + deltas + CMN feature file")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("build-dataset", help="manifest and outputs for one training regime")
    p.add_argument("--regime", required=True, choices=[r.value for r in dataset.Regime])
    p.add_argument("--scale", default="paper", help="'paper' or 'desk:k'")
    p.add_argument("--clean-list", required=True)
    p.add_argument("--validation-list")
    p.add_argument("--test-list")
    p.add_argument("--noise-dir")
    p.add_argument("--train-noises", help="comma-separated noise ids")
    p.add_argument("--test-noises", help="comma-separated noise ids")
    p.add_argument("--enhancer", default="perturbed:0.2", help="training enhancer for distortion_independent")
    p.add_argument("--eval-enhancer", help="enhance test entries with this mask")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--mode", default="both", choices=["audio", "features", "both"])
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--dry-run", action="store_true", help="write the manifest only")
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("verify", help="run the built-in invariant suites")
    p.add_argument("--suite", default="all", choices=["all", *verify.SUITES])
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UnsupportedFormat, ValueError) as exc:
        print(f"dfrg {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (DfrgError, OSError) as exc:
        print(f"dfrg {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
