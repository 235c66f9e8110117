"""Command-line front door. A thin client of the HTTP API.

Without --server the app is mounted in-process over an ASGI transport, so
commands run locally with no daemon; with --server they hit a remote
instance. Exit codes: 0 success, 2 input/parse error, 3 domain error,
4 I/O error.
"""

from __future__ import annotations

import json
import sys

import click
import httpx

EXIT_BY_CATEGORY = {"input": 2, "domain": 3, "io": 4}


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server.rstrip("/"), timeout=None)
    from .service import create_app

    transport = httpx.ASGITransport(app=create_app())
    return httpx.Client(transport=transport, base_url="http://asrforge.local", timeout=None)


def _call(ctx: click.Context, path: str, payload: dict) -> dict:
    client: httpx.Client = ctx.obj["client"]
    try:
        response = client.post(path, json=payload)
    except httpx.HTTPError as exc:
        click.echo(f"error: cannot reach server: {exc}", err=True)
        sys.exit(4)
    if response.status_code >= 400:
        try:
            error = response.json().get("error", {})
        except json.JSONDecodeError:
            error = {}
        category = error.get("category", "input" if response.status_code < 500 else "io")
        message = error.get("message", response.text)
        code = error.get("code", str(response.status_code))
        click.echo(f"error [{code}]: {message}", err=True)
        sys.exit(EXIT_BY_CATEGORY.get(category, 2))
    return response.json()


@click.group()
@click.option("--server", default=None, envvar="ASRFORGE_SERVER",
              help="Base URL of a running asrforge service; default runs in-process.")
@click.pass_context
def main(ctx: click.Context, server: str | None) -> None:
    """Corpus preparation, augmentation, decoding and scoring for ASR."""
    ctx.ensure_object(dict)
    ctx.obj["client"] = _client(server)


@main.command()
@click.argument("manifest", type=click.Path())
@click.option("--json", "as_json", is_flag=True, help="Emit JSON records instead of a table.")
@click.pass_context
def stats(ctx: click.Context, manifest: str, as_json: bool) -> None:
    """Hours per dataset and split."""
    body = _call(ctx, "/v1/stats", {"manifest": manifest})
    if as_json:
        click.echo(json.dumps(body["records"], ensure_ascii=False))
    else:
        click.echo(body["table"])


@main.command()
@click.argument("manifest", type=click.Path())
@click.option("--audio-root", required=True, type=click.Path())
@click.option("--jsonl", "as_jsonl", is_flag=True, help="Emit JSON-lines problems.")
@click.pass_context
def validate(ctx: click.Context, manifest: str, audio_root: str, as_jsonl: bool) -> None:
    """Check audio existence, readability, durations and transcripts."""
    body = _call(ctx, "/v1/validate", {"manifest": manifest, "audio_root": audio_root})
    click.echo(body["jsonl"] if as_jsonl else body["report"])


@main.command()
@click.argument("manifest", type=click.Path())
@click.option("--audio-root", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--target-dbfs", default="auto", show_default=True,
              help='"auto" (train-split corpus mean) or an explicit dBFS value.')
@click.option("--splits", default=None, help="Comma-separated splits to write (default all).")
@click.option("--jobs", default=1, show_default=True, envvar="ASRFORGE_JOBS")
@click.pass_context
def normalize(ctx, manifest, audio_root, out_dir, target_dbfs, splits, jobs) -> None:
    """Normalize clip gain to the corpus mean (or an explicit target)."""
    if target_dbfs == "auto":
        target = None
    else:
        try:
            target = float(target_dbfs)
        except ValueError:
            click.echo(f"error: --target-dbfs must be 'auto' or a number, got {target_dbfs!r}", err=True)
            sys.exit(2)
    payload = {
        "manifest": manifest,
        "audio_root": audio_root,
        "out_dir": out_dir,
        "target_dbfs": target,
        "splits": None if splits is None else splits.split(","),
        "jobs": jobs,
    }
    body = _call(ctx, "/v1/normalize", payload)
    click.echo(
        f"normalized {body['files_written']} files to {body['target_dbfs']:.4f} dBFS "
        f"({body['target_source']}); {body['silent_passthrough']} silent passthrough, "
        f"{body['clipped_files']} clipped; sidecar: {body['sidecar']}"
    )


@main.command()
@click.argument("manifest", type=click.Path())
@click.option("--audio-root", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--noise-dir", default=None, type=click.Path())
@click.option("--rir-dir", default=None, type=click.Path())
@click.option("--low-noise-datasets", default="MLS,CETUC", show_default=True,
              help="Comma-separated dataset names eligible for augmentation.")
@click.option("--seed", default=0, show_default=True)
@click.option("--replay", "replay_log", default=None, type=click.Path(),
              help="Reproduce a previous run from its JSON-lines action log.")
@click.option("--jobs", default=1, show_default=True, envvar="ASRFORGE_JOBS")
@click.pass_context
def augment(ctx, manifest, audio_root, out_dir, noise_dir, rir_dir,
            low_noise_datasets, seed, replay_log, jobs) -> None:
    """Selective noise insertion over low-noise datasets."""
    payload = {
        "manifest": manifest,
        "audio_root": audio_root,
        "out_dir": out_dir,
        "noise_dir": noise_dir,
        "rir_dir": rir_dir,
        "low_noise_datasets": [d for d in low_noise_datasets.split(",") if d],
        "seed": seed,
        "replay_log": replay_log,
        "jobs": jobs,
    }
    body = _call(ctx, "/v1/augment", payload)
    click.echo(
        f"wrote {body['files_written']} files ({body['augmented']} augmented, "
        f"{body['passthrough']} passthrough); log: {body['log_path']}"
    )


@main.command()
@click.argument("emissions_dir", type=click.Path())
@click.option("--out", "out_csv", required=True, type=click.Path())
@click.option("--lm", default=None, type=click.Path(), help="ARPA LM for shallow fusion.")
@click.option("--alpha", default=0.5, show_default=True, help="LM weight.")
@click.option("--beta", default=1.0, show_default=True, help="Word insertion bonus.")
@click.option("--beam", "beam_width", default=100, show_default=True)
@click.option("--normalize", is_flag=True, help="Log-softmax emission rows on load.")
@click.option("--jobs", default=1, show_default=True, envvar="ASRFORGE_JOBS")
@click.pass_context
def decode(ctx, emissions_dir, out_csv, lm, alpha, beta, beam_width, normalize, jobs) -> None:
    """Decode CTCE emission files into a hypothesis CSV."""
    payload = {
        "emissions_dir": emissions_dir,
        "out_csv": out_csv,
        "lm": lm,
        "alpha": alpha,
        "beta": beta,
        "beam_width": beam_width,
        "normalize": normalize,
        "jobs": jobs,
    }
    body = _call(ctx, "/v1/decode", payload)
    click.echo(f"decoded {body['utterances']} utterances -> {body['out_csv']}")


@main.command()
@click.option("--ref", "manifest", required=True, type=click.Path(),
              help="Reference manifest CSV.")
@click.option("--hyp", "hypotheses", required=True, type=click.Path(),
              help="Hypothesis CSV (audio_path,hypothesis).")
@click.option("--by-dataset", is_flag=True, help="Add the per-dataset breakdown.")
@click.option("--format", "fmt", default="text-table", show_default=True,
              type=click.Choice(["text-table", "csv", "json"]))
@click.pass_context
def score(ctx, manifest, hypotheses, by_dataset, fmt) -> None:
    """CER/WER per track (and optionally per dataset)."""
    payload = {
        "manifest": manifest,
        "hypotheses": hypotheses,
        "by_dataset": by_dataset,
        "format": fmt,
    }
    body = _call(ctx, "/v1/score", payload)
    click.echo(body["report"])


@main.command("lm-train")
@click.option("--corpus", required=True, type=click.Path(), help="One sentence per line.")
@click.option("--order", default=4, show_default=True)
@click.option("--discount", default=0.75, show_default=True)
@click.option("--out", required=True, type=click.Path(), help="Output ARPA path.")
@click.option("--dev", default=None, type=click.Path(),
              help="Held-out text; prints its perplexity.")
@click.pass_context
def lm_train(ctx, corpus, order, discount, out, dev) -> None:
    """Train a Kneser-Ney n-gram LM and write it as ARPA."""
    payload = {"corpus": corpus, "order": order, "discount": discount, "out": out, "dev": dev}
    body = _call(ctx, "/v1/lm/train", payload)
    counts = " ".join(f"{k}:{v}" for k, v in sorted(body["ngram_counts"].items(), key=lambda kv: int(kv[0])))
    click.echo(f"wrote {body['arpa_path']} (order {body['order']}, ngrams {counts})")
    if body["dev_perplexity"] is not None:
        click.echo(f"dev perplexity: {body['dev_perplexity']:.4f}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8570, show_default=True)
def serve(host: str, port: int) -> None:
    """Run the asrforge HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
