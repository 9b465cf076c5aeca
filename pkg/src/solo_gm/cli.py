"""Command-line entry points: serve, play, replay, export-trace, report."""

from __future__ import annotations

import json
import sys
import tempfile
from pathlib import Path

import click

from .engine import GmEngine, LogicalClock, RealClock, replay_campaign, transcript_hash
from .llm import HttpBackend, load_script
from .react import RequestOptions
from .service import create_app
from .state import CampaignStore, EngineVersion

DEFAULT_DATA_DIR = "./campaigns"
FRONTEND_DIST = Path(__file__).resolve().parents[2] / "frontend" / "dist"

PLAY_HELP = """Commands:
  /do <action>     perform an action
  /say <words>     speak in character
  /attack <whom>   attack a target
  /state           show characters and environments
  /save            persist the campaign now
  /quit            leave the game
Plain text without a prefix is treated as /do."""


def build_backend(backend_kind: str, script_path: str | None):
    if backend_kind == "script":
        if not script_path:
            raise click.UsageError("--backend script requires --script PATH")
        return load_script(script_path)
    return HttpBackend()


def build_options(backend_kind: str) -> RequestOptions:
    # Scripted runs are deterministic test runs; play against a live model warmer.
    temperature = 0.0 if backend_kind == "script" else 0.7
    return RequestOptions(model=HttpBackend.default_model(), temperature=temperature)


def build_engine(data_dir: str, backend_kind: str, script_path: str | None) -> GmEngine:
    return GmEngine(
        store=CampaignStore(data_dir),
        backend=build_backend(backend_kind, script_path),
        options=build_options(backend_kind),
        clock=RealClock(),
    )


@click.group()
def main():
    """Solo tabletop-RPG game master."""


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--data-dir", default=DEFAULT_DATA_DIR, show_default=True)
@click.option("--backend", "backend_kind", type=click.Choice(["real", "script"]), default="real",
              show_default=True)
@click.option("--script", "script_path", type=click.Path(exists=True), default=None)
def serve(host: str, port: int, data_dir: str, backend_kind: str, script_path: str | None):
    """Run the HTTP service (and the web UI, when built)."""
    import uvicorn

    engine = build_engine(data_dir, backend_kind, script_path)
    frontend = str(FRONTEND_DIST) if FRONTEND_DIST.is_dir() else None
    app = create_app(engine, frontend_dir=frontend)
    click.echo(f"serving on http://{host}:{port} (data dir: {data_dir})")
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command()
@click.option("--engine", "engine_version", type=click.Choice(["v1", "v2"]), required=True)
@click.option("--seed", default=None, type=int)
@click.option("--setting", default="fantasy", show_default=True)
@click.option("--scenario", default="", help="Blank picks a pre-generated story prompt.")
@click.option("--player-name", default="Adventurer", show_default=True)
@click.option("--player-desc", default="", help="Player character description.")
@click.option("--data-dir", default=DEFAULT_DATA_DIR, show_default=True)
@click.option("--backend", "backend_kind", type=click.Choice(["real", "script"]), default="real",
              show_default=True)
@click.option("--script", "script_path", type=click.Path(exists=True), default=None)
def play(engine_version, seed, setting, scenario, player_name, player_desc, data_dir,
         backend_kind, script_path):
    """Play a campaign in the terminal."""
    import random as _random

    gm = build_engine(data_dir, backend_kind, script_path)
    rng_seed = seed if seed is not None else _random.SystemRandom().getrandbits(64)
    version = EngineVersion.V1 if engine_version == "v1" else EngineVersion.V2
    campaign, introduction = gm.create_campaign(
        setting, scenario, player_name, player_desc, version, rng_seed
    )
    click.echo(f"campaign {campaign.id} (seed {rng_seed})\n")
    click.echo(introduction + "\n")
    while True:
        try:
            line = click.prompt("you", prompt_suffix="> ", default="", show_default=False).strip()
        except (EOFError, click.Abort):
            click.echo("\nfarewell.")
            return
        if not line:
            continue
        if line.startswith("/"):
            command, _, rest = line.partition(" ")
            command = command.casefold()
            if command == "/quit":
                click.echo("farewell.")
                return
            if command == "/save":
                gm.store.save(gm.get_campaign(campaign.id))
                click.echo("saved.")
                continue
            if command == "/state":
                current = gm.get_campaign(campaign.id)
                for character in current.characters:
                    click.echo(
                        f"  {character.name}: {character.current_hp}/{character.max_hp} HP "
                        f"({character.health_state.value})"
                    )
                for environment in current.environments:
                    marker = " <- you are here" if environment.is_player_here else ""
                    click.echo(f"  [{environment.name}]{marker}")
                continue
            if command in ("/do", "/say", "/attack"):
                if not rest.strip():
                    click.echo("say or do what?")
                    continue
                kind, text = command[1:], rest
            else:
                click.echo(PLAY_HELP)
                continue
        else:
            kind, text = "do", line
        try:
            outcome = gm.take_turn(campaign.id, kind, text)
        except Exception as exc:
            click.echo(f"the world wavers: {exc}")
            continue
        click.echo("\n" + outcome.narrative + "\n")


@main.command()
@click.option("--campaign", "campaign_id", required=True)
@click.option("--script", "script_path", type=click.Path(exists=True), required=True)
@click.option("--data-dir", default=DEFAULT_DATA_DIR, show_default=True)
def replay(campaign_id: str, script_path: str, data_dir: str):
    """Re-run a saved campaign against a script and verify the transcript."""
    store = CampaignStore(data_dir)
    original = store.load(campaign_id)
    backend = load_script(script_path)
    with tempfile.TemporaryDirectory() as tmp:
        replayed, divergences = replay_campaign(
            original, backend, CampaignStore(tmp), options=RequestOptions(temperature=0.0)
        )
    if divergences:
        click.echo("transcript diverged:")
        for divergence in divergences:
            click.echo("  " + divergence)
        sys.exit(1)
    click.echo(f"transcript hash: {transcript_hash(replayed)}")


@main.command("export-trace")
@click.option("--campaign", "campaign_id", required=True)
@click.option("--data-dir", default=DEFAULT_DATA_DIR, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Write to a file instead of stdout.")
def export_trace(campaign_id: str, data_dir: str, out_path: str | None):
    """Dump a campaign's per-turn trajectory trace as JSON."""
    store = CampaignStore(data_dir)
    store.load(campaign_id)
    trace = store.load_trace(campaign_id)
    payload = json.dumps(trace, indent=2, ensure_ascii=False)
    if out_path:
        Path(out_path).write_text(payload, encoding="utf-8")
        click.echo(f"wrote {out_path}")
    else:
        click.echo(payload)


@main.command()
@click.option("--out", "out_dir", type=click.Path(), default="./report", show_default=True)
@click.option("--seed", default=5, show_default=True, type=int)
@click.option("--trials", default=10_000, show_default=True, type=int)
@click.option("--turns", default=20, show_default=True, type=int)
def report(out_dir: str, seed: int, trials: int, turns: int):
    """Render the hit-rate and context-growth figures with their CSVs."""
    from .report import write_context_growth_report, write_hit_rate_report

    hit = write_hit_rate_report(out_dir, seed=seed, trials=trials)
    growth = write_context_growth_report(out_dir, turns=turns, seed=seed)
    click.echo(f"wrote {hit['csv']}, {hit['png']}, {growth['csv']}, {growth['png']}")


if __name__ == "__main__":
    main()
