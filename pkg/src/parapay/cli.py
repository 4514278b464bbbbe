"""Command-line interface for expectile-based payment design.

Every subcommand is a thin client over the HTTP service: by default
the app is mounted in-process, with ``--server`` the same requests go
to a remote deployment.  Outputs are machine-readable (JSON with
stable key order, CSV with '.' decimals) and carry a metadata header
with tool version, seed, worker count, and a hash of the effective
config, so identical configs produce byte-identical artifacts.

Exit codes: 0 success, 2 validation failure, 3 numerical failure.
"""

from __future__ import annotations

import csv
import functools
import hashlib
import json
import re
import sys
from pathlib import Path

import click

from . import __version__
from .client import ServiceClient
from .errors import NumericalError, ParameterError

_COVARIATE = re.compile(r"x\d+")


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _parse_json(text: str, what: str) -> dict:
    try:
        value = json.loads(text)
    except ValueError as exc:
        raise ParameterError(f"{what} is not valid JSON: {exc}") from None
    if not isinstance(value, dict):
        raise ParameterError(f"{what} must be a JSON object")
    return value


def _read_table(path) -> dict[str, list[float]]:
    """Read a CSV with a header row; '#' lines are metadata comments."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if len(rows) < 2:
        raise ParameterError(f"{path}: need a header row and at least one data row")
    header = [name.strip() for name in rows[0]]
    if len(set(header)) != len(header):
        raise ParameterError(f"{path}: duplicate column names in header")
    columns: dict[str, list[float]] = {name: [] for name in header}
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ParameterError(f"{path}: row {i} has {len(row)} fields, expected {len(header)}")
        for name, cell in zip(header, row):
            try:
                columns[name].append(float(cell))
            except ValueError:
                raise ParameterError(f"{path}: column '{name}', row {i}: not a number: {cell!r}") from None
    return columns


def _require_columns(columns: dict, names: tuple[str, ...], path) -> None:
    missing = [name for name in names if name not in columns]
    if missing:
        raise ParameterError(f"{path}: missing required column(s): {', '.join(missing)}")


def _covariate_rows(columns: dict) -> list[list[float]] | None:
    names = sorted((n for n in columns if _COVARIATE.fullmatch(n)), key=lambda n: int(n[1:]))
    if not names:
        return None
    n_rows = len(next(iter(columns.values())))
    return [[columns[name][i] for name in names] for i in range(n_rows)]


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


class RunContext:
    """Global flags plus the service client, shared by all subcommands."""

    def __init__(self, seed, seed_explicit, workers, out, blob, server):
        self.seed = seed
        self.seed_explicit = seed_explicit
        self.workers = workers
        self.out = Path(out) if out is not None else None
        self.blob = blob
        self.client = ServiceClient(server)

    def effective_seed(self, blob: dict) -> int:
        # an explicit --seed flag beats the config file; otherwise a
        # seed key in the config is the more specific setting
        if self.seed_explicit or "seed" not in blob:
            return self.seed
        return int(blob["seed"])

    def metadata(self, payload: dict, seed: int | None = None) -> dict:
        digest = hashlib.sha256(_canonical(payload).encode("utf-8")).hexdigest()
        return {
            "tool": "parapay",
            "version": __version__,
            "seed": self.seed if seed is None else seed,
            "workers": self.workers,
            "config_sha256": digest,
        }

    def emit_json(self, name: str, document: dict) -> None:
        text = json.dumps(document, sort_keys=True, indent=2) + "\n"
        click.echo(text, nl=False)
        if self.out is not None:
            self.out.mkdir(parents=True, exist_ok=True)
            (self.out / f"{name}.json").write_text(text, encoding="utf-8")

    def write_json(self, name: str, document: dict) -> str:
        text = json.dumps(document, sort_keys=True, indent=2) + "\n"
        (self.out / name).write_text(text, encoding="utf-8")
        return name

    def write_csv(self, name: str, metadata: dict, header: list[str], rows) -> str:
        with open(self.out / name, "w", encoding="utf-8", newline="") as fh:
            for key, value in metadata.items():
                fh.write(f"# {key}: {value}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(cell) for cell in row])
        return name

    def require_out(self, subcommand: str) -> None:
        if self.out is None:
            raise ParameterError(f"{subcommand} writes multiple files; pass --out DIR")
        self.out.mkdir(parents=True, exist_ok=True)


def guarded(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ParameterError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except NumericalError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)

    return wrapper


@click.group()
@click.version_option(version=__version__, prog_name="parapay")
@click.option("--seed", type=int, default=0, show_default=True, help="Base RNG seed.")
@click.option("--workers", type=int, default=1, show_default=True,
              help="Worker count (echoed into metadata; results are worker-count invariant).")
@click.option("--out", type=click.Path(file_okay=False), default=None,
              help="Directory for output artifacts.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="JSON file with subcommand parameters; flags override.")
@click.option("--server", default=None, metavar="URL",
              help="Remote service URL; default runs the service in-process.")
@click.pass_context
def main(ctx, seed, workers, out, config_path, server):
    """Design and evaluate index-based payment schemes."""
    if seed < 0:
        raise click.BadParameter("seed must be nonnegative", param_hint="--seed")
    if workers < 1:
        raise click.BadParameter("workers must be at least 1", param_hint="--workers")
    blob = {}
    if config_path is not None:
        try:
            blob = _parse_json(Path(config_path).read_text(encoding="utf-8"), "--config file")
        except ParameterError as exc:
            raise click.BadParameter(str(exc), param_hint="--config") from None
    source = ctx.get_parameter_source("seed")
    seed_explicit = source is not None and source.name == "COMMANDLINE"
    ctx.obj = RunContext(seed, seed_explicit, workers, out, blob, server)
    ctx.call_on_close(ctx.obj.client.close)


@main.command("expectile")
@click.option("--gamma", "gammas", multiple=True, type=float, help="Expectile level in (0, 1); repeatable.")
@click.option("--alpha", "alphas", multiple=True, type=float,
              help="Basis-risk weight in (0, 1); mapped to its gamma level; repeatable.")
@click.option("--samples", "samples_path", type=click.Path(exists=True, dir_okay=False),
              help="CSV with an 's' column of observations.")
@click.option("--dist", "dist_json", default=None, metavar="JSON",
              help='Distribution config, e.g. \'{"family":"normal","mu":0,"sigma":1}\'.')
@click.pass_obj
@guarded
def cmd_expectile(obj: RunContext, gammas, alphas, samples_path, dist_json):
    """Compute expectiles of a distribution or a sample file."""
    blob = dict(obj.blob)
    if gammas:
        blob["gammas"] = list(gammas)
    if alphas:
        blob["alphas"] = list(alphas)
    if dist_json is not None:
        blob["distribution"] = _parse_json(dist_json, "--dist")
    if samples_path is not None:
        columns = _read_table(samples_path)
        _require_columns(columns, ("s",), samples_path)
        blob["samples"] = columns["s"]
    payload = {
        "distribution": blob.get("distribution"),
        "samples": blob.get("samples"),
        "gammas": blob.get("gammas", []),
        "alphas": blob.get("alphas", []),
    }
    result = obj.client.post("/expectile", payload)
    values = {repr(float(item["gamma"])): item["value"] for item in result["results"]}
    obj.emit_json("expectile", {
        "metadata": obj.metadata(payload),
        "values": values,
        "results": result["results"],
    })


@main.command("fit")
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False),
              help="CSV with columns s, theta and optional covariates x1..xQ.")
@click.option("--gamma", type=float, default=None, help="Expectile level in (0, 1).")
@click.option("--design", "design_kind", type=click.Choice(["pure", "linear", "step"]),
              default=None, help="Payment scheme design to fit.")
@click.option("--trigger", "trigger_json", default=None, metavar="JSON",
              help='Trigger config for the pure design, e.g. \'{"kind":"above","threshold":1}\'.')
@click.option("--bins", "bins_text", default=None, metavar="EDGES",
              help="Comma-separated bin edges for the step design.")
@click.pass_obj
@guarded
def cmd_fit(obj: RunContext, data_path, gamma, design_kind, trigger_json, bins_text):
    """Fit a payment scheme by asymmetric least squares."""
    blob = dict(obj.blob)
    if data_path is not None:
        blob["data"] = data_path
    if gamma is not None:
        blob["gamma"] = gamma
    if design_kind is not None:
        blob["design"] = design_kind
    if trigger_json is not None:
        blob["trigger"] = _parse_json(trigger_json, "--trigger")
    if bins_text is not None:
        try:
            blob["bins"] = [float(edge) for edge in bins_text.split(",")]
        except ValueError:
            raise ParameterError(f"--bins must be comma-separated numbers, got {bins_text!r}") from None
    if "data" not in blob:
        raise ParameterError("fit needs a data CSV; pass --data or a 'data' config key")
    if "gamma" not in blob:
        raise ParameterError("fit needs --gamma or a 'gamma' config key")
    columns = _read_table(blob["data"])
    _require_columns(columns, ("s", "theta"), blob["data"])
    payload = {
        "theta": columns["theta"],
        "response": columns["s"],
        "design": {
            "kind": blob.get("design", "linear"),
            "trigger": blob.get("trigger"),
            "bins": blob.get("bins"),
        },
        "covariates": _covariate_rows(columns),
        "gamma": blob["gamma"],
        "tol": blob.get("tol", 1e-10),
        "max_iter": blob.get("max_iter", 200),
    }
    result = obj.client.post("/fit", payload)
    obj.emit_json("fit", {"metadata": obj.metadata(payload), **result})


@main.command("design")
@click.option("--alpha", type=float, default=None, help="Basis-risk weight in (0, 1).")
@click.option("--trigger", "trigger_json", default=None, metavar="JSON", help="Trigger config.")
@click.option("--loss", "loss_json", default=None, metavar="JSON",
              help="Loss distribution given the trigger, for a fixed payout.")
@click.pass_obj
@guarded
def cmd_design(obj: RunContext, alpha, trigger_json, loss_json):
    """Construct the basis-risk-optimal payment scheme.

    Pass --loss for a fixed payout, or a 'nodes' config key (list of
    {theta, loss} entries) for a tabulated payment curve.
    """
    blob = dict(obj.blob)
    if alpha is not None:
        blob["alpha"] = alpha
    if trigger_json is not None:
        blob["trigger"] = _parse_json(trigger_json, "--trigger")
    if loss_json is not None:
        blob["loss"] = _parse_json(loss_json, "--loss")
    for key in ("alpha", "trigger"):
        if key not in blob:
            raise ParameterError(f"design needs --{key} or an '{key}' config key")
    payload = {
        "alpha": blob["alpha"],
        "trigger": blob["trigger"],
        "loss": blob.get("loss"),
        "nodes": blob.get("nodes"),
    }
    result = obj.client.post("/design", payload)
    obj.emit_json("design", {"metadata": obj.metadata(payload), **result})


@main.command("evaluate")
@click.option("--scheme", "scheme_path", type=click.Path(exists=True, dir_okay=False),
              help="Scheme JSON (a design artifact or a bare scheme config).")
@click.option("--alpha", type=float, default=None, help="Basis-risk weight in (0, 1).")
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False),
              help="CSV with columns theta (index) and s (realized loss).")
@click.pass_obj
@guarded
def cmd_evaluate(obj: RunContext, scheme_path, alpha, data_path):
    """Estimate the basis risk of a payment scheme on observed data."""
    blob = dict(obj.blob)
    if scheme_path is not None:
        document = _parse_json(Path(scheme_path).read_text(encoding="utf-8"), scheme_path)
        blob["scheme"] = document["scheme"] if isinstance(document.get("scheme"), dict) else document
    if alpha is not None:
        blob["alpha"] = alpha
    if data_path is not None:
        blob["data"] = data_path
    for key in ("scheme", "alpha", "data"):
        if key not in blob:
            raise ParameterError(f"evaluate needs --{key} or a '{key}' config key")
    columns = _read_table(blob["data"])
    _require_columns(columns, ("theta", "s"), blob["data"])
    payload = {
        "scheme": blob["scheme"],
        "alpha": blob["alpha"],
        "theta": columns["theta"],
        "loss": columns["s"],
    }
    result = obj.client.post("/evaluate", payload)
    obj.emit_json("evaluate", {"metadata": obj.metadata(payload), **result})


@main.command("crop-case")
@click.option("--alpha", "alphas", multiple=True, type=float,
              help="Basis-risk weight for the payment curves; repeatable.  [default: 0.5]")
@click.option("--farms", type=int, default=None, help="Number of farms (overrides config).")
@click.pass_obj
@guarded
def cmd_crop(obj: RunContext, alphas, farms):
    """Run the area-yield case study: farm portfolio and payment curves.

    Writes locations.csv, curve.csv, and metadata.json into --out.
    The config file may hold any portfolio field (n_farms, radius,
    yield_mean, yield_sd, crit, floor, threshold, corr_scale, seed)
    plus 'alphas' and a 'theta' grid.
    """
    obj.require_out("crop-case")
    blob = dict(obj.blob)
    if alphas:
        blob["alphas"] = list(alphas)
    if farms is not None:
        blob["n_farms"] = farms
    alphas = blob.pop("alphas", [0.5])
    theta = blob.pop("theta", None)
    config = dict(blob)
    config["seed"] = obj.effective_seed(blob)
    payload = {"config": config, "alphas": alphas, "theta": theta}
    result = obj.client.post("/crop-case", payload)
    metadata = obj.metadata(payload, seed=config["seed"])

    locations = result["locations"]
    index_cov = result["index_cov"]
    rows = [
        [farm, xy[0], xy[1], index_cov[farm]]
        for farm, xy in enumerate(locations)
    ]
    written = [obj.write_csv("locations.csv", metadata, ["farm", "x", "y", "index_cov"], rows)]

    grid = result["theta"]
    pay_columns = [f"payment_{_fmt(float(a))}" for a in alphas]
    curve_rows = []
    for role in ("central", "peripheral"):
        farm = result[role]
        curves = result["curves"][role]
        for i, theta_i in enumerate(grid):
            row = [theta_i, farm, role]
            row += [curves[str(float(a))][i] for a in alphas]
            curve_rows.append(row)
    written.append(obj.write_csv(
        "curve.csv", metadata, ["theta", "farm", "role", *pay_columns], curve_rows
    ))

    written.append(obj.write_json("metadata.json", {
        "metadata": metadata,
        "config": config,
        "alphas": alphas,
        "n_farms": len(locations),
        "central": result["central"],
        "peripheral": result["peripheral"],
    }))
    click.echo(json.dumps({"written": written}))


@main.command("cyber-sim")
@click.option("--family", "families", multiple=True, type=click.Choice(["lognormal", "gamma"]),
              help="Outage-duration family; repeatable.  [default: both]")
@click.option("--gamma", "gammas", multiple=True, type=float,
              help="Payout expectile level; repeatable.  [default: 0.4 0.5 0.6 0.9]")
@click.option("--p-level", "p_levels", multiple=True, type=float,
              help="Trigger quantile level; repeatable.  [default: 0.05..0.5]")
@click.option("--years", type=int, default=None, help="Contract horizon in years.  [default: 5]")
@click.option("--runs", type=int, default=None, help="Simulation runs per family.  [default: 1000]")
@click.option("--mode", type=click.Choice(["static", "dynamic"]), default=None,
              help="Threshold/payout updating.  [default: static]")
@click.option("--no-records", is_flag=True, help="Write only the summary, not per-incident records.")
@click.pass_obj
@guarded
def cmd_cyber(obj: RunContext, families, gammas, p_levels, years, runs, mode, no_records):
    """Run the cloud-outage study: simulate incidents, losses, payouts.

    Writes records.csv and summary.json into --out.
    """
    obj.require_out("cyber-sim")
    blob = dict(obj.blob)
    if families:
        blob["families"] = list(dict.fromkeys(families))
    if gammas:
        blob["gammas"] = list(gammas)
    if p_levels:
        blob["p_levels"] = list(p_levels)
    if years is not None:
        blob["years"] = years
    if runs is not None:
        blob["runs"] = runs
    if mode is not None:
        blob["mode"] = mode
    if no_records:
        blob["include_records"] = False
    payload = {
        "families": blob.get("families", ["lognormal", "gamma"]),
        "gammas": blob.get("gammas", [0.4, 0.5, 0.6, 0.9]),
        "p_levels": blob.get("p_levels"),
        "services": blob.get("services"),
        "years": blob.get("years", 5),
        "runs": blob.get("runs", 1000),
        "seed": obj.effective_seed(blob),
        "mode": blob.get("mode", "static"),
        "include_records": blob.get("include_records", True),
    }
    result = obj.client.post("/cyber-sim", payload)
    metadata = obj.metadata(payload, seed=payload["seed"])

    out_gammas = result["gammas"]
    header = ["run", "family", "service", "time", "year", "duration", "n_triggered", "loss_sum"]
    header += [f"payout_sum_{_fmt(float(g))}" for g in out_gammas]
    header += [f"deviation_sum_{_fmt(float(g))}" for g in out_gammas]
    rows = (
        [rec["run"], rec["family"], rec["service"], rec["time"], rec["year"], rec["duration"],
         rec["n_triggered"], rec["loss_sum"], *rec["payout_sum"], *rec["deviation_sum"]]
        for rec in result["records"]
    )
    written = [obj.write_csv("records.csv", metadata, header, rows)]
    written.append(obj.write_json("summary.json", {
        "metadata": metadata,
        "summary": result["summary"],
    }))
    click.echo(json.dumps({"written": written}))


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def cmd_serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
