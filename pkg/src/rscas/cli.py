"""Command line front end.

All commands that touch an index take --index-dir (or the RSCAS_INDEX_DIR
environment variable). Diagnostics go to stderr and set a nonzero exit code;
result data goes to stdout as tab-separated rows or one ref per line.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .bulkload import NoKeysError
from .core_keys import KeyError_, RecordError, read_records
from .disk_trie import FormatError
from .lsm import (CONFIG_NAME, MANIFEST_NAME, IndexBusyError, LsmConfig,
                  LsmIndex, stats as index_stats)
from .query import QueryGrammarError, parse_query
from . import costmodel

_ERRORS = (RecordError, QueryGrammarError, NoKeysError, FormatError, KeyError_,
           IndexBusyError, FileNotFoundError, FileExistsError, ValueError)


def _fail(exc: BaseException) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(1)


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


_index_dir_option = click.option(
    "--index-dir", envvar="RSCAS_INDEX_DIR", required=True,
    type=click.Path(file_okay=False), help="Index directory (env: RSCAS_INDEX_DIR).")


@click.group()
def main() -> None:
    """Content-and-structure index over path/value composite keys."""


@main.command("build")
@_index_dir_option
@click.option("--tau", default=100, show_default=True, help="Max keys per leaf subtree.")
@click.option("--memory-keys", default=1_000_000, show_default=True,
              help="Keys the mutable trie holds before spilling.")
@click.option("--page-size", default=16384, show_default=True,
              help="Scratch partition page size in bytes.")
@click.option("--value-length", default=8, show_default=True,
              help="Fixed value width in bytes.")
@click.option("--background/--no-background", default=False, show_default=True,
              help="Run overflow merges on a worker thread.")
@click.argument("input_file", type=click.File("r"))
def cmd_build(index_dir, tau, memory_keys, page_size, value_length, background, input_file):
    """Create an index and bulk load INPUT_FILE (path TAB value TAB ref lines)."""
    try:
        if (Path(index_dir) / CONFIG_NAME).exists():
            raise FileExistsError(f"index already present in {index_dir}")
        config = LsmConfig(memory_keys=memory_keys, tau=tau, page_size=page_size,
                           value_length=value_length, background_merge=background)
        index = LsmIndex.create(Path(index_dir), config)
        try:
            report = index.bulk_build(read_records(input_file, value_length))
        except BaseException:
            # Leave no half-made index behind; a corrected retry must not
            # trip over the config this invocation wrote.
            index.close()
            for name in (CONFIG_NAME, MANIFEST_NAME):
                (Path(index_dir) / name).unlink(missing_ok=True)
            raise
        index.close()
    except _ERRORS as exc:
        _fail(exc)
    for label, value in (("keys", report.key_count), ("nodes", report.node_count),
                         ("bytes", report.file_bytes),
                         ("pages_read", report.counters.pages_read),
                         ("pages_written", report.counters.pages_written)):
        click.echo(f"{label}\t{value}")


@main.command("insert")
@_index_dir_option
@click.option("--tau", default=100, show_default=True)
@click.option("--memory-keys", default=1_000_000, show_default=True)
@click.option("--page-size", default=16384, show_default=True)
@click.option("--value-length", default=8, show_default=True)
@click.option("--background/--no-background", default=False, show_default=True)
@click.argument("input_file", type=click.File("r"))
def cmd_insert(index_dir, tau, memory_keys, page_size, value_length, background, input_file):
    """Insert records into an index, creating it first if absent.

    Creation uses the given build options; an existing index keeps its own.
    """
    try:
        path = Path(index_dir)
        if (path / CONFIG_NAME).exists():
            index = LsmIndex.open(path)
        else:
            index = LsmIndex.create(path, LsmConfig(
                memory_keys=memory_keys, tau=tau, page_size=page_size,
                value_length=value_length, background_merge=background))
        inserted = 0
        for key in read_records(input_file, index.config.value_length):
            index.insert(key)
            inserted += 1
        index.close()
    except _ERRORS as exc:
        _fail(exc)
    click.echo(f"inserted\t{inserted}")
    for level, count in index.merge_log:
        click.echo(f"merge\tlevel {level}\t{count} keys", err=True)


@main.command("query")
@_index_dir_option
@click.option("--count", "count_only", is_flag=True, help="Print only the match count.")
@click.argument("pattern")
@click.argument("v_low")
@click.argument("v_high")
def cmd_query(index_dir, count_only, pattern, v_low, v_high):
    """Match PATTERN plus the inclusive value range [V_LOW, V_HIGH].

    PATTERN labels may use '*' within a label and '**' as a whole label.
    Bounds are decimal or 0x-prefixed hex. Prints matching refs as hex, one
    per line, sorted.
    """
    try:
        index = LsmIndex.open(Path(index_dir))
        q = parse_query(pattern, v_low, v_high, index.config.value_length)
        refs = index.query(q)
        index.close()
    except _ERRORS as exc:
        _fail(exc)
    if count_only:
        click.echo(str(len(refs)))
        return
    for ref in sorted(r.hex() for r in refs):
        click.echo(ref)


@main.command("stats")
@_index_dir_option
def cmd_stats(index_dir):
    """Structural statistics per trie: sizes, depth and fanout shape."""
    try:
        index = LsmIndex.open(Path(index_dir))
        report = index_stats(index)
        index.close()
    except _ERRORS as exc:
        _fail(exc)
    click.echo(f"total\tkeys\t{report.total_keys}")
    click.echo(f"total\ttries\t{len(report.tries)}")
    for trie in report.tries:
        for label, value in (
                ("keys", trie.key_count), ("nodes", trie.node_count),
                ("leaves", trie.leaf_count), ("max_depth", trie.max_depth),
                ("avg_leaf_depth", trie.avg_leaf_depth),
                ("avg_fanout", trie.avg_fanout),
                ("expected_depth", trie.expected_depth)):
            click.echo(f"{trie.name}\t{label}\t{_fmt(value)}")
        for depth in sorted(trie.depth_histogram):
            click.echo(f"{trie.name}\tdepth_hist.{depth}\t{trie.depth_histogram[depth]}")
        for fanout in sorted(trie.fanout_histogram):
            click.echo(f"{trie.name}\tfanout_hist.{fanout}\t{trie.fanout_histogram[fanout]}")


@main.group("analyze")
def cmd_analyze() -> None:
    """Closed-form cost estimates; no index required."""


@cmd_analyze.command("robustness")
@click.option("--fanout", "-o", default=10.0, show_default=True)
@click.option("--height", default=12, show_default=True)
@click.option("--sigma-path", default=0.5, show_default=True,
              help="Per-step path selectivity of the query class.")
@click.option("--sigma-value", default=0.1, show_default=True,
              help="Per-step value selectivity of the query class.")
def cmd_analyze_robustness(fanout, height, sigma_path, sigma_value):
    """Search-cost table per dimension order, on a query class and its mirror.

    Costs are the level-sum term; the full estimate adds 1 for the root.
    """
    try:
        rows = costmodel.robustness_report(fanout, height, sigma_path, sigma_value)
    except _ERRORS as exc:
        _fail(exc)
    click.echo("order\tcost\tcost_mirrored\taverage\tspread")
    for row in rows:
        click.echo(f"{row.name}\t{_fmt(row.cost)}\t{_fmt(row.cost_complementary)}"
                   f"\t{_fmt(row.average)}\t{_fmt(row.spread)}")


@cmd_analyze.command("io")
@click.option("--keys", "n_keys", default=1_000_000, show_default=True)
@click.option("--memory-keys", default=100_000, show_default=True)
@click.option("--page-keys", default=100, show_default=True,
              help="Keys per scratch page.")
@click.option("--fanout", default=16, show_default=True,
              help="Partition fanout assumed for the uniform estimate.")
def cmd_analyze_io(n_keys, memory_keys, page_keys, fanout):
    """Construction and amortized insertion page I/O estimates."""
    try:
        uniform = costmodel.bulk_io_uniform(n_keys, memory_keys, page_keys, fanout)
        skewed = costmodel.bulk_io_skewed(n_keys, memory_keys, page_keys)
        amortized = costmodel.amortized_insert_io(
            n_keys, memory_keys, page_keys,
            lambda n, m, b: costmodel.bulk_io_uniform(n, m, b, fanout))
    except _ERRORS as exc:
        _fail(exc)
    click.echo(f"uniform_pages\t{uniform}")
    click.echo(f"skewed_pages\t{skewed}")
    click.echo(f"amortized_insert_pages\t{_fmt(amortized)}")


@cmd_analyze.command("leaf")
@click.option("--tau", default=100, show_default=True)
@click.option("--prefixes", default=1000, show_default=True,
              help="Distinct key prefixes a leaf draws from.")
@click.option("--page-keys", default=512, show_default=True)
@click.option("--entry-bytes", default=16, show_default=True)
@click.option("--selectivity", default=0.01, show_default=True,
              help="Cumulative query selectivity across all steps.")
@click.option("--steps", default=8, show_default=True)
@click.option("--levels", default=12, show_default=True)
@click.option("--branching", default=8, show_default=True)
def cmd_analyze_leaf(tau, prefixes, page_keys, entry_bytes, selectivity, steps,
                     levels, branching):
    """Leaf-capacity trade-offs for one tau setting."""
    try:
        est = costmodel.tau_estimators(tau, prefixes, page_keys, entry_bytes,
                                       selectivity, steps, levels, branching)
    except _ERRORS as exc:
        _fail(exc)
    for label, value in (
            ("metadata_bytes_per_page", est.metadata_bytes_per_page),
            ("expected_distinct_prefixes", est.expected_distinct_prefixes),
            ("duplicate_overhead", est.duplicate_overhead),
            ("visited_nodes", est.visited_nodes),
            ("step_selectivity", est.step_selectivity),
            ("irrelevant_keys", est.irrelevant_keys)):
        click.echo(f"{label}\t{_fmt(value)}")


@cmd_analyze.command("depth")
@click.option("--fanout", default=8.0, show_default=True,
              help="Average observed fanout.")
@click.option("--keys", "n_keys", default=1_000_000, show_default=True)
@click.option("--tau", default=100, show_default=True)
def cmd_analyze_depth(fanout, n_keys, tau):
    """Expected trie depth for a key count, fanout and leaf capacity."""
    try:
        value = costmodel.expected_depth(fanout, n_keys, tau)
    except _ERRORS as exc:
        _fail(exc)
    click.echo(f"expected_depth\t{_fmt(value)}")


if __name__ == "__main__":
    main()
