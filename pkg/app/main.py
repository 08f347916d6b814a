import logging
from fractions import Fraction
from pathlib import Path
from typing import Optional, Tuple

import click

from db import MachineRepository, NetworkRepository, ReportRepository

from .config import settings
from .errors import QnetError
from .models import LoadRow, VerifyReportFile, probe_spec
from .services import SimulationService, VerificationService
from .services.compiler import compile_scm, network_stats
from .services.counter_machine import cm_to_scm
from .services.verification import audit_loads
from .utils.rational import format_rational, parse_rational

logger = logging.getLogger(__name__)

EXIT_MISMATCH = 3
EXIT_INVARIANT_VIOLATION = 4


class RationalType(click.ParamType):
    name = "rational"

    def convert(self, value, param, ctx):
        if isinstance(value, Fraction):
            return value
        try:
            return parse_rational(value)
        except ValueError as e:
            self.fail(str(e), param, ctx)


RATIONAL = RationalType()
EXISTING_FILE = click.Path(exists=True, dir_okay=False, path_type=Path)
OUTPUT_FILE = click.Path(dir_okay=False, path_type=Path)


class QnetGroup(click.Group):
    """Maps domain errors to their exit codes and usage errors to 1"""

    def make_context(self, info_name, args, parent=None, **extra):
        try:
            return super().make_context(info_name, args, parent=parent, **extra)
        except click.UsageError as e:
            e.exit_code = 1
            raise

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except click.UsageError as e:
            e.exit_code = 1
            raise
        except QnetError as e:
            logger.debug(f"{type(e).__name__}: {e}")
            click.echo(f"error: {e}", err=True)
            ctx.exit(e.exit_code)


@click.group(cls=QnetGroup)
@click.option("--log-level", default=None, help="Overrides QNET_LOG_LEVEL")
def cli(log_level: Optional[str]):
    """Compile counter machines into queueing networks, simulate them and verify the encoding."""
    logging.basicConfig(level=(log_level or settings.log_level).upper())


@cli.command("compile")
@click.argument("scm_file", type=EXISTING_FILE)
@click.option("--normalized", is_flag=True, help="Apply the load-normalizing transform")
@click.option("-o", "--output", type=OUTPUT_FILE, required=True)
def cmd_compile(scm_file: Path, normalized: bool, output: Path):
    """Compile an SCM file into a network file."""
    scm = MachineRepository().load_scm(scm_file)
    cn = compile_scm(scm, normalized=normalized)
    NetworkRepository().save(cn, output)
    stats = network_stats(cn)
    click.echo(f"{output}: {stats.servers} servers, {stats.classes} classes")


@cli.command("cm2scm")
@click.argument("cm_file", type=EXISTING_FILE)
@click.option("-o", "--output", type=OUTPUT_FILE, required=True)
def cmd_cm2scm(cm_file: Path, output: Path):
    """Turn a counter machine file into an equivalent SCM file."""
    scm = cm_to_scm(MachineRepository().load_cm(cm_file))
    MachineRepository().save_scm(scm, output)
    click.echo(f"{output}: {scm.m} states")


@cli.command("simulate")
@click.argument("net_file", type=EXISTING_FILE)
@click.option("--until", "until", type=RATIONAL, required=True, help="Horizon, e.g. 20 or 31/2")
@click.option("--trace", "trace_out", type=OUTPUT_FILE, default=None, help="Event trace CSV")
@click.option("--probe", "probes", multiple=True, help="W:<class>,<class>@<cadence>")
@click.option("--probe-out", type=OUTPUT_FILE, default=None, help="Probe CSV (default: <net>.probe.csv)")
@click.option("--job-limit", type=int, default=None)
def cmd_simulate(
    net_file: Path,
    until: Fraction,
    trace_out: Optional[Path],
    probes: Tuple[str, ...],
    probe_out: Optional[Path],
    job_limit: Optional[int],
):
    """Run a network file up to a horizon."""
    if until < 0:
        raise click.BadParameter("horizon must be nonnegative", param_hint="--until")
    cn = NetworkRepository().load(net_file)
    service = SimulationService(job_limit=job_limit)
    result = service.simulate(cn, until, [probe_spec(p) for p in probes])
    reports = ReportRepository()
    if trace_out is not None:
        reports.save_trace_csv(result.trace.events, trace_out)
    if probes:
        reports.save_probe_csv(result.probe_rows, probe_out or net_file.with_suffix(".probe.csv"))
    click.echo(
        f"t={format_rational(result.trace.end_time)}: {len(result.trace.events)} events, "
        f"{result.state.live_jobs()} live jobs"
    )


@cli.command("verify")
@click.argument("scm_file", type=EXISTING_FILE)
@click.option("--cycles", type=click.IntRange(min=1), default=None, help="Defaults to QNET_DEFAULT_CYCLES")
@click.option("--normalized", is_flag=True)
@click.option("-o", "--output", type=OUTPUT_FILE, default=None, help="Report JSON")
@click.option("--csv", "csv_out", type=OUTPUT_FILE, default=None, help="Per-cycle CSV")
@click.option("--job-limit", type=int, default=None)
def cmd_verify(
    scm_file: Path,
    cycles: Optional[int],
    normalized: bool,
    output: Optional[Path],
    csv_out: Optional[Path],
    job_limit: Optional[int],
):
    """Check that the compiled network tracks the machine cycle by cycle."""
    scm = MachineRepository().load_scm(scm_file)
    cycles = cycles or settings.default_cycles
    report, bounds = VerificationService(job_limit=job_limit).verify(scm, cycles, normalized, name=scm_file.stem)
    document = VerifyReportFile.from_report(scm_file.stem, report, bounds)
    reports = ReportRepository()
    if output is not None:
        reports.save_verify_report(document, output)
    if csv_out is not None:
        reports.save_cycle_csv(document, csv_out)

    click.echo(f"{len(report.statuses)} statuses, first mismatch: {report.first_mismatch}")
    click.echo(f"{len(report.violations)} invariant violations")
    click.echo(
        f"jobs at cycle starts <= {bounds.left_limit_max} (bound {bounds.bound}), "
        f"excess {bounds.excess}, growth: {'yes' if bounds.growth else 'no'}"
    )
    if report.first_mismatch is not None:
        click.get_current_context().exit(EXIT_MISMATCH)
    if report.violations:
        click.get_current_context().exit(EXIT_INVARIANT_VIOLATION)


@cli.command("loads")
@click.argument("net_file", type=EXISTING_FILE)
def cmd_loads(net_file: Path):
    """Print the load factor of every server."""
    cn = NetworkRepository().load(net_file)
    places = settings.decimal_places
    rows = [LoadRow.from_audit(sid, audit, places) for sid, audit in audit_loads(cn.spec).items()]
    frame = ReportRepository(places).loads_frame(rows)
    click.echo(frame.to_string(index=False))


def main():
    cli(prog_name="qnet")


if __name__ == "__main__":
    main()
