"""Operational command line: serve the API, seed fixtures, desk dosing."""

from __future__ import annotations

import json
import socket
from datetime import datetime, timezone
from pathlib import Path

import click

from .api import create_app
from .dosing import AdultDose, DosingError, clarks_dose, kg_to_lb
from .formulary import FormularyError, load_formulary
from .store import RecordsStore, StoreError


@click.group()
def main() -> None:
    """Pediatric e-prescription service."""


def _load_formulary_file(path: str):
    try:
        with open(path, "rb") as handle:
            return load_formulary(handle)
    except OSError as exc:
        raise click.ClickException(f"cannot read formulary {path}: {exc}") from exc
    except FormularyError as exc:
        raise click.ClickException(f"formulary {path}: {exc}") from exc


@main.command()
@click.option("--port", type=int, default=8000, envvar="PEDSCRIPT_PORT", show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--db", required=True, envvar="PEDSCRIPT_DB", help="SQLite database path.")
@click.option(
    "--formulary", "formulary_path", required=True, envvar="PEDSCRIPT_FORMULARY",
    help="Formulary JSON document.",
)
def serve(port: int, host: str, db: str, formulary_path: str) -> None:
    """Start the HTTP service."""
    import uvicorn

    formulary = _load_formulary_file(formulary_path)
    try:
        probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
        probe.close()
    except OSError as exc:
        raise click.ClickException(f"cannot bind {host}:{port}: {exc}") from exc
    store = RecordsStore(db)
    click.echo(f"formulary {formulary.version}: {len(formulary.monographs)} monographs")
    uvicorn.run(create_app(store, formulary), host=host, port=port, log_level="info")


@main.command()
@click.option("--db", required=True, envvar="PEDSCRIPT_DB", help="SQLite database path.")
@click.option("--fixtures", "fixtures_path", type=click.Path(), help="Fixtures JSON (users, patients).")
@click.option(
    "--formulary", "formulary_path", type=click.Path(), envvar="PEDSCRIPT_FORMULARY",
    help="Formulary JSON to validate.",
)
def seed(db: str, fixtures_path: str | None, formulary_path: str | None) -> None:
    """Load seed fixtures and validate the formulary."""
    if not fixtures_path and not formulary_path:
        raise click.ClickException("nothing to do: pass --fixtures and/or --formulary")
    if formulary_path:
        formulary = _load_formulary_file(formulary_path)
        click.echo(f"formulary {formulary.version}: {len(formulary.monographs)} monographs ok")
    if fixtures_path:
        try:
            document = json.loads(Path(fixtures_path).read_text("utf-8"))
        except OSError as exc:
            raise click.ClickException(f"cannot read fixtures {fixtures_path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise click.ClickException(
                f"fixtures {fixtures_path}: invalid JSON at line {exc.lineno}, column {exc.colno}"
            ) from exc
        store = RecordsStore(db)
        try:
            counts = store.load_fixtures(document, datetime.now(timezone.utc))
        except StoreError as exc:
            raise click.ClickException(f"fixtures {fixtures_path}: {exc}") from exc
        finally:
            store.close()
        click.echo(f"seeded {counts['users']} users, {counts['patients']} patients into {db}")


@main.command()
@click.option("--weight-kg", type=float, required=True, help="Child's weight in kilograms.")
@click.option("--adult-dose", type=float, required=True, help="Adult reference dose amount.")
@click.option("--unit", default="mg", show_default=True)
def dose(weight_kg: float, adult_dose: float, unit: str) -> None:
    """Print the Clark's-rule child dose for desk use."""
    try:
        weight = kg_to_lb(weight_kg)
        child = clarks_dose(weight, AdultDose(amount=adult_dose, unit=unit))
    except DosingError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"{weight_kg} kg = {round(weight.value, 4)} lb")
    click.echo(f"Child dose: {child.amount} {child.unit}")


if __name__ == "__main__":
    main()
