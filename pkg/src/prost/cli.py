"""Command-line client for the tracking service.

Every command talks to the HTTP API: against a remote server when
``--server`` is given, otherwise against an in-process instance of the
app.  All heavy lifting happens behind the API either way, so the CLI
stays a thin request builder and result printer.

Exit codes: 0 success, 2 usage, 3 validation, 4 I/O, 5 non-finite data.
"""

from __future__ import annotations

import base64
import sys
import warnings
from pathlib import Path

import click
import httpx

EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_IO = 4
EXIT_NUMERIC = 5

_KIND_CODES = {"validation": EXIT_VALIDATION, "io": EXIT_IO, "numeric": EXIT_NUMERIC}


def _open_client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    from .service import create_app

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient
    return TestClient(create_app())


def _call(client: httpx.Client, method: str, path: str, **kwargs) -> dict:
    try:
        response = client.request(method, path, **kwargs)
    except httpx.HTTPError as exc:
        click.echo(f"error: cannot reach server ({exc})", err=True)
        raise SystemExit(EXIT_IO)
    if response.status_code >= 400:
        try:
            payload = response.json()
        except ValueError:
            payload = {"detail": response.text}
        detail = payload.get("detail", "request failed")
        click.echo(f"error: {detail}", err=True)
        if response.status_code == 422:
            raise SystemExit(EXIT_USAGE)
        if response.status_code == 404:
            raise SystemExit(EXIT_IO)
        raise SystemExit(_KIND_CODES.get(payload.get("kind"), EXIT_VALIDATION))
    return response.json()


def _read_config_file(path: str | None) -> dict:
    """Flat key=value file; blank lines and # comments ignored."""
    if path is None:
        return {}
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        click.echo(f"error: cannot read config file: {exc}", err=True)
        raise SystemExit(EXIT_IO)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            click.echo(f"error: {path}:{lineno}: expected key=value", err=True)
            raise SystemExit(EXIT_USAGE)
        key, value = line.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


_SETTING_TYPES = {
    "subspace_dim": int,
    "p": float,
    "mu": str,
    "delta": float,
    "omega": float,
    "t_init": float,
    "t_min": float,
    "i_init": int,
    "tau": float,
    "cg_max_iters": int,
    "resolution": str,
    "grayscale": lambda v: str(v).lower() in ("1", "true", "yes", "on"),
    "seed": int,
}


def _build_settings(config_file: str | None, flags: dict) -> dict:
    """Merge built-in defaults, config file values, and explicit flags."""
    merged: dict = {}
    file_values = _read_config_file(config_file)
    for key, raw in file_values.items():
        if key not in _SETTING_TYPES:
            click.echo(f"error: unknown config key {key!r}", err=True)
            raise SystemExit(EXIT_USAGE)
        try:
            merged[key] = _SETTING_TYPES[key](raw)
        except ValueError:
            click.echo(f"error: bad value for config key {key!r}: {raw!r}", err=True)
            raise SystemExit(EXIT_USAGE)
    for key, value in flags.items():
        if value is not None:
            merged[key] = value

    settings: dict = {}
    resolution = merged.pop("resolution", None)
    if resolution is not None:
        try:
            w, h = resolution.lower().split("x")
            settings["target_width"], settings["target_height"] = int(w), int(h)
        except ValueError:
            click.echo(f"error: resolution must look like 160x120, got {resolution!r}", err=True)
            raise SystemExit(EXIT_USAGE)
    mu = merged.pop("mu", None)
    if mu is not None and str(mu).lower() != "auto":
        try:
            settings["mu"] = float(mu)
        except ValueError:
            click.echo(f"error: --mu must be a number or 'auto', got {mu!r}", err=True)
            raise SystemExit(EXIT_USAGE)
    settings.update(merged)
    return settings


def _echo_config(config: dict) -> None:
    line = " ".join(f"{key}={config[key]}" for key in sorted(config))
    click.echo(f"config: {line}")


def _parse_range(text: str | None) -> tuple[int, int] | None:
    if text is None:
        return None
    try:
        first, last = text.split(":")
        return int(first), int(last)
    except ValueError:
        click.echo(f"error: range must look like FIRST:LAST, got {text!r}", err=True)
        raise SystemExit(EXIT_USAGE)


def _parse_deltas(text: str) -> list[float]:
    try:
        if ":" in text:
            start, stop, count = text.split(":")
            start, stop, count = float(start), float(stop), int(count)
            if count < 1:
                raise ValueError
            if count == 1:
                return [start]
            step = (stop - start) / (count - 1)
            return [start + i * step for i in range(count)]
        return [float(v) for v in text.split(",") if v]
    except ValueError:
        click.echo(
            f"error: deltas must be a comma list or START:STOP:COUNT, got {text!r}", err=True
        )
        raise SystemExit(EXIT_USAGE)


def _write_or_print(csv_text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(csv_text)
        click.echo(f"wrote {output}")
    else:
        click.echo(csv_text, nl=False)


def settings_options(fn):
    """Tracker parameter flags shared by the processing commands."""
    options = [
        click.option("--subspace-dim", "subspace_dim", type=int, default=None,
                     help="Subspace dimension k [15]."),
        click.option("--p", type=float, default=None, help="Cost exponent in (0, 2] [0.25]."),
        click.option("--mu", type=str, default=None,
                     help="Smoothing offset, or 'auto' for delta^2*(1-p) [auto]."),
        click.option("--delta", type=float, default=None, help="Segmentation threshold [0.35]."),
        click.option("--omega", type=float, default=None, help="Foreground fit weight [5e-5]."),
        click.option("--t-init", "t_init", type=float, default=None,
                     help="Initial subspace step size [5e-3]."),
        click.option("--t-min", "t_min", type=float, default=None,
                     help="Floor subspace step size [1e-4]."),
        click.option("--i-init", "i_init", type=int, default=None,
                     help="Initialization window in frames [pre-evaluation prefix, else 100]."),
        click.option("--tau", type=float, default=None,
                     help="Explicit step decay rate (overrides the i-init derivation)."),
        click.option("--cg-iters", "cg_max_iters", type=int, default=None,
                     help="Conjugate gradient iteration cap per frame [5]."),
        click.option("--resolution", type=str, default=None,
                     help="Processing resolution WxH [160x120]."),
        click.option("--grayscale", is_flag=True, default=None,
                     help="Collapse color input to one channel."),
        click.option("--seed", type=int, default=None, help="Basis initialization seed [0]."),
        click.option("--config", "config_file", type=str, default=None,
                     help="key=value config file; flags override file values."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


@click.group()
@click.option("--server", type=str, default=None,
              help="Base URL of a running service; default runs in-process.")
@click.version_option(package_name="prost")
@click.pass_context
def main(ctx, server):
    """Robust online background subtraction: track, score, and benchmark."""
    ctx.obj = server


def _sequence_ref(path: str, pattern: str | None, gt: str | None, eval_range: str | None) -> dict:
    ref: dict = {"path": path}
    if pattern:
        ref["pattern"] = pattern
    if gt:
        ref["groundtruth_dir"] = gt
    parsed = _parse_range(eval_range)
    if parsed:
        ref["eval_range"] = parsed
    return ref


@main.command()
@click.argument("input_dir", type=str)
@click.option("--output", type=str, default=None, help="Directory for mask files.")
@click.option("--pattern", type=str, default=None, help="Frame filename pattern [in%06d.ppm].")
@click.option("--gt", type=str, default=None, help="Ground-truth directory (unused by track).")
@click.option("--eval-range", type=str, default=None, help="FIRST:LAST annotated window.")
@click.option("--emit-backgrounds", is_flag=True, help="Also write model reconstructions.")
@click.option("--no-masks", is_flag=True, help="Do not write mask files.")
@click.option("--snapshot-in", type=str, default=None, help="Resume from a snapshot file.")
@click.option("--snapshot-out", type=str, default=None, help="Save a snapshot when done.")
@settings_options
@click.pass_obj
def track(server, input_dir, output, pattern, gt, eval_range, emit_backgrounds, no_masks,
          snapshot_in, snapshot_out, config_file, **flags):
    """Segment a frame sequence, writing per-frame masks."""
    payload = {
        "sequence": _sequence_ref(input_dir, pattern, gt, eval_range),
        "settings": _build_settings(config_file, flags),
        "output_dir": output,
        "emit_masks": not no_masks,
        "emit_backgrounds": emit_backgrounds,
        "snapshot_in": snapshot_in,
        "snapshot_out": snapshot_out,
    }
    with _open_client(server) as client:
        result = _call(client, "POST", "/jobs/track", json=payload)
    _echo_config(result["config"])
    click.echo(
        f"processed {result['frames']} frames "
        f"({result['masks_written']} masks) at {result['fps']:.2f} frames/second"
    )


@main.command()
@click.argument("sequences", type=str, nargs=-1, required=True)
@click.option("--output", type=str, default=None, help="Write the report CSV here.")
@click.option("--pattern", type=str, default=None, help="Frame filename pattern [in%06d.ppm].")
@click.option("--gt", type=str, default=None,
              help="Ground-truth directory (single-sequence runs only).")
@click.option("--eval-range", type=str, default=None, help="FIRST:LAST annotated window.")
@settings_options
@click.pass_obj
def evaluate(server, sequences, output, pattern, gt, eval_range, config_file, **flags):
    """Score sequences against ground truth (seven measures)."""
    if gt is not None and len(sequences) > 1:
        click.echo("error: --gt applies to a single sequence", err=True)
        raise SystemExit(EXIT_USAGE)
    payload = {
        "sequences": [_sequence_ref(path, pattern, gt, eval_range) for path in sequences],
        "settings": _build_settings(config_file, flags),
    }
    with _open_client(server) as client:
        result = _call(client, "POST", "/jobs/evaluate", json=payload)
    _echo_config(result["config"])
    header = f"{'sequence':24} {'recall':>8} {'spec':>8} {'fpr':>8} {'fnr':>8} {'pwc':>8} {'prec':>8} {'fmeas':>8}"
    click.echo(header)
    for row in result["rows"]:
        click.echo(
            f"{row['sequence']:24} {row['recall']:8.4f} {row['specificity']:8.4f} "
            f"{row['fpr']:8.4f} {row['fnr']:8.4f} {row['pwc']:8.3f} "
            f"{row['precision']:8.4f} {row['fmeasure']:8.4f}"
        )
    if output:
        Path(output).write_text(result["csv"])
        click.echo(f"wrote {output}")


@main.command()
@click.argument("sequence", type=str)
@click.option("--deltas", type=str, required=True,
              help="Comma list or START:STOP:COUNT sweep of thresholds.")
@click.option("--output", type=str, default=None, help="Write the ROC CSV here.")
@click.option("--pattern", type=str, default=None, help="Frame filename pattern [in%06d.ppm].")
@click.option("--gt", type=str, default=None, help="Ground-truth directory.")
@click.option("--eval-range", type=str, default=None, help="FIRST:LAST annotated window.")
@click.option("--replay", is_flag=True,
              help="Re-threshold one pass instead of running one pass per delta.")
@settings_options
@click.pass_obj
def sweep(server, sequence, deltas, output, pattern, gt, eval_range, replay, config_file, **flags):
    """Trace an ROC curve by sweeping the segmentation threshold."""
    delta_values = _parse_deltas(deltas)
    if not delta_values:
        click.echo("error: at least one delta is required", err=True)
        raise SystemExit(EXIT_USAGE)
    payload = {
        "sequence": _sequence_ref(sequence, pattern, gt, eval_range),
        "deltas": delta_values,
        "settings": _build_settings(config_file, flags),
        "replay": replay,
    }
    with _open_client(server) as client:
        result = _call(client, "POST", "/jobs/sweep", json=payload)
    _echo_config(result["config"])
    for point in result["points"]:
        click.echo(f"delta={point['delta']:.4g} fpr={point['fpr']:.6g} recall={point['recall']:.6g}")
    if output:
        Path(output).write_text(result["csv"])
        click.echo(f"wrote {output}")


@main.command()
@click.option("--m", type=int, default=100, show_default=True, help="Ambient dimension.")
@click.option("--k", type=int, default=5, show_default=True, help="True subspace dimension.")
@click.option("--frames", type=int, default=2000, show_default=True, help="Stream length.")
@click.option("--fraction", type=float, default=0.1, show_default=True,
              help="Outlier fraction per frame.")
@click.option("--magnitude", type=float, default=1.0, show_default=True, help="Outlier size.")
@click.option("--sigma", type=float, default=1e-3, show_default=True, help="Noise level.")
@click.option("--p-values", type=str, default="0.25,0.5,1.0,2.0", show_default=True,
              help="Comma list of cost exponents to compare.")
@click.option("--seeds", type=str, default="0,1,2,3,4,5,6,7,8,9", show_default=True,
              help="Comma list of stream seeds (paired across exponents).")
@click.option("--output", type=str, default=None, help="Write the results CSV here.")
@settings_options
@click.pass_obj
def synth(server, m, k, frames, fraction, magnitude, sigma, p_values, seeds, output,
          config_file, **flags):
    """Benchmark subspace recovery on synthetic corrupted streams."""
    try:
        p_list = [float(v) for v in p_values.split(",") if v]
        seed_list = [int(v) for v in seeds.split(",") if v]
    except ValueError:
        click.echo("error: --p-values and --seeds must be comma lists of numbers", err=True)
        raise SystemExit(EXIT_USAGE)
    settings = _build_settings(config_file, flags)
    # The synthetic benchmark compares cost exponents on equal footing:
    # schedule matched to the stream and neutral pixel weights.
    settings.setdefault("subspace_dim", k)
    settings.setdefault("p", 0.5)
    settings.setdefault("omega", 1.0)
    settings.setdefault("t_init", 1e-2)
    settings.setdefault("t_min", 1e-4)
    settings.setdefault("i_init", 500)
    payload = {
        "m": m, "k": k, "n_frames": frames,
        "outlier_fraction": fraction, "outlier_magnitude": magnitude, "noise_sigma": sigma,
        "p_values": p_list, "seeds": seed_list,
        "settings": settings,
    }
    with _open_client(server) as client:
        result = _call(client, "POST", "/jobs/synth", json=payload)
    _echo_config(result["config"])
    for p_key in sorted(result["medians"], key=float):
        click.echo(f"p={p_key}: median subspace error {result['medians'][p_key]:.6g}")
    click.echo(f"verdict: {result['verdict']}")
    if output:
        Path(output).write_text(result["csv"])
        click.echo(f"wrote {output}")
    else:
        click.echo(result["csv"], nl=False)


@main.group()
def snapshot():
    """Save or restore tracker sessions via snapshot files."""


@snapshot.command("save")
@click.argument("session_id", type=str)
@click.argument("path", type=str)
@click.pass_obj
def snapshot_save(server, session_id, path):
    """Fetch a session's state into a local snapshot file."""
    with _open_client(server) as client:
        result = _call(client, "GET", f"/sessions/{session_id}/snapshot")
    Path(path).write_bytes(base64.b64decode(result["snapshot_b64"]))
    click.echo(f"wrote {path}")


@snapshot.command("load")
@click.argument("path", type=str)
@settings_options
@click.pass_obj
def snapshot_load(server, path, config_file, **flags):
    """Create a new session from a snapshot file (prints its id)."""
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        raise SystemExit(EXIT_IO)
    payload = {
        "snapshot_b64": base64.b64encode(blob).decode(),
        "settings": _build_settings(config_file, flags),
    }
    with _open_client(server) as client:
        result = _call(client, "POST", "/sessions/from-snapshot", json=payload)
    click.echo(f"session {result['session_id']} at frame {result['frame_index']}")


@main.command()
@click.option("--host", type=str, default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8321, show_default=True)
def serve(host, port):
    """Run the tracking service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
