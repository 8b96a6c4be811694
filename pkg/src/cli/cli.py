"""
Sparse2Dense - CLI Module
Command-line interface: encode, decode, inspect, rd-report, rd-sweep,
eval-losses, init-weights, profiles and new-profile.
"""

import functools
import json
import sys
from pathlib import Path
from typing import List, Optional

import click
import numpy as np
from rich.console import Console
from rich.panel import Panel
from rich.progress import Progress, SpinnerColumn, TextColumn
from rich.table import Table

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from src.analytics.charts import ChartGenerator
from src.analytics.rate_distortion import RDReport, analyze_container, bd_rate, sequence_psnr
from src.config import Config, CodecConfig, FrameFormat
from src.modules.codec_pipeline import (build_weights, decode_sequence, encode_sequence,
                                        evaluate_sequence, rd_sweep)
from src.modules.container import Container
from src.modules.errors import CodecError, ConfigError, MalformedInputError
from src.modules.exporter import Exporter, loss_report, read_vertices
from src.modules.frame_io import list_frames, load_frame, load_frames
from src.modules.logger import Logger, LogLevel
from src.modules.loss_eval import AffineTransform
from src.modules.profile_manager import ProfileManager
from src.modules.tensor_core import Tensor, as_tensor
from src.modules.weights import WeightBundle
from src.utils import Utils

console = Console()
err_console = Console(stderr=True)


def setup_logging(log_level: str) -> Logger:
    """Setup logging with specified level."""
    logger = Logger.get_instance()
    logger.set_level(LogLevel.from_string(log_level))
    return logger


def export_log(logger: Logger, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    exported = logger.export_json(path) if path.suffix.lower() == '.json' else logger.export_txt(path)
    if not exported:
        err_console.print(f"[yellow]⚠️ Could not write log export:[/] {path}")


def handle_errors(func):
    """Map CodecError to its exit code; anything else exits 1."""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except CodecError as e:
            err_console.print(f"[red]❌ {type(e).__name__}:[/] {e}")
            sys.exit(e.exit_code)
        except click.exceptions.Exit:
            raise
        except Exception as e:
            err_console.print(f"[red]❌ Unexpected error:[/] {e}")
            sys.exit(1)
    return wrapper


def read_bytes(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise MalformedInputError(f"Cannot read {path}", reason=str(e)) from e


def resolve_config(profile: str, profiles_dir: Optional[str], **overrides) -> CodecConfig:
    config = CodecConfig.from_profile(profile, Path(profiles_dir) if profiles_dir else None)
    return config.replace(**overrides).validate()


def parse_q_values(text: str) -> List[int]:
    try:
        values = [int(part) for part in text.split(',') if part.strip()]
    except ValueError as e:
        raise ConfigError("--q-log2 must be a comma-separated list of integers", value=text) from e
    if not values:
        raise ConfigError("--q-log2 needs at least one value")
    return values


def load_logits(path: str) -> Tensor:
    try:
        return as_tensor(np.load(path, allow_pickle=False))
    except (OSError, ValueError) as e:
        raise MalformedInputError(f"Cannot read logits from {path}", reason=str(e)) from e


def print_report(report: RDReport, title: str) -> None:
    table = Table(title=title, show_header=True)
    table.add_column("Metric", style="cyan")
    table.add_column("Value", style="green")
    table.add_row("Frames", str(report.frames))
    table.add_row("Total bits", f"{report.total_bits:,} ({Utils.get_bits_human(report.total_bits)})")
    table.add_row("Header bits", f"{report.header_bits:,}")
    table.add_row("Keyframe bits", f"{report.keyframe_bits:,}")
    table.add_row("Keypoint bits", f"{report.total_keypoint_bits:,}")
    table.add_row("Bitrate", f"{report.kbps:.3f} kbps")
    table.add_row("Keypoint bitrate", f"{report.keypoint_kbps:.3f} kbps")
    finite = [p for p in report.psnr if p is not None and p != float('inf')]
    if report.psnr:
        table.add_row("Mean PSNR", f"{sum(finite) / len(finite):.2f} dB" if finite else "inf")
    console.print(table)


@click.group()
@click.option('--log-level', '-l',
              type=click.Choice(['trace', 'debug', 'info', 'warn', 'error']),
              default='warn', help='Logging level')
@click.option('--log-file', is_flag=True, help='Also write a dated log file under logs/')
@click.option('--log-export', type=click.Path(),
              help='Write the collected log entries on exit (.json, otherwise text)')
@click.pass_context
def cli(ctx, log_level, log_file, log_export):
    """Sparse2Dense - keypoint-driven human video codec"""
    ctx.ensure_object(dict)
    logger = ctx.obj['logger'] = setup_logging(log_level)
    if log_file:
        logger.enable_file_output(Config.get_paths().logs)
    if log_export:
        ctx.call_on_close(functools.partial(export_log, logger, Path(log_export)))


# ==================== CODEC ====================

@cli.command()
@click.option('--input', '-i', 'input_source', required=True,
              help='Frame directory or glob pattern; the first frame is the key-reference')
@click.option('--weights', '-w', type=click.Path(exists=True), required=True, help='S2DW weight file')
@click.option('--out', '-o', type=click.Path(), required=True, help='Output container')
@click.option('--q-log2', type=int, help='Keypoint quantization step exponent')
@click.option('--fps', type=str, help='Frame rate as A/B')
@click.option('--depth', type=int, help='Keypoint depth slices D')
@click.option('--profile', '-p', default='desk', help='Configuration profile')
@click.option('--profiles-dir', type=click.Path(), help='Profile directory')
@click.option('--keyframe-payload', type=click.Path(exists=True),
              help='Externally coded key-reference payload (input frame 0 is its decoded image)')
@click.option('--json', 'as_json', is_flag=True, help='Print the report as JSON')
@click.pass_context
@handle_errors
def encode(ctx, input_source, weights, out, q_log2, fps, depth, profile, profiles_dir,
           keyframe_payload, as_json):
    """Encode a frame sequence into an S2DC container."""
    fps_num, fps_den = Utils.parse_fps(fps) if fps else (None, None)
    config = resolve_config(profile, profiles_dir, q_log2=q_log2, depth=depth,
                            fps_num=fps_num, fps_den=fps_den,
                            keyframe_codec='external' if keyframe_payload else None)
    frames = load_frames(list_frames(input_source))
    payload = read_bytes(keyframe_payload) if keyframe_payload else None

    result = encode_sequence(frames, config, WeightBundle.load(weights), payload)
    out_path = Path(out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_bytes(result.data)

    if as_json:
        click.echo(Utils.to_json(result.to_dict()))
        return
    console.print(f"[green]✅ Container written:[/] {out_path} ({len(result.data):,} bytes)")
    print_report(result.report, "📊 Encode Report")


@cli.command()
@click.option('--in', 'in_path', type=click.Path(exists=True), required=True, help='S2DC container')
@click.option('--weights', '-w', type=click.Path(exists=True), required=True, help='S2DW weight file')
@click.option('--frames-out', type=click.Path(), required=True, help='Directory for frames')
@click.option('--vertices-out', type=click.Path(), help='Directory for S2DV vertex files')
@click.option('--format', '-f', 'frame_format', type=click.Choice(['png', 'ppm']), default='png')
@click.option('--csv', 'write_csv', is_flag=True, help='Also write vertices as CSV')
@click.option('--motion-out', type=click.Path(), help='Directory for raw motion dumps')
@click.option('--keyframe-image', type=click.Path(exists=True),
              help='Decoded image for an externally coded key-reference payload')
@click.option('--profile', '-p', default='desk', help='Configuration profile')
@click.option('--profiles-dir', type=click.Path(), help='Profile directory')
@click.pass_context
@handle_errors
def decode(ctx, in_path, weights, frames_out, vertices_out, frame_format, write_csv,
           motion_out, keyframe_image, profile, profiles_dir):
    """Decode a container into frames and vertex sets."""
    config = resolve_config(profile, profiles_dir)
    data = read_bytes(in_path)
    key_image = load_frame(keyframe_image, 0) if keyframe_image else None

    with Progress(SpinnerColumn(), TextColumn("[progress.description]{task.description}"),
                  console=err_console, transient=True) as progress:
        task = progress.add_task("Decoding...", total=None)
        result = decode_sequence(data, WeightBundle.load(weights), config,
                                 keyframe_image=key_image,
                                 with_vertices=vertices_out is not None,
                                 keep_motion=motion_out is not None)
        progress.update(task, completed=100)

    exporter = Exporter(FrameFormat(frame_format), write_csv)
    exported = exporter.export_sequence(result.frames, result.vertices, frames_out, vertices_out)
    if motion_out:
        exporter.export_motion(result.motions, motion_out)
    if not exported.success:
        raise MalformedInputError("Export failed", errors='; '.join(exported.errors))

    console.print(f"[green]✅ Decoded {len(result.frames)} frames[/] → {frames_out}")


# ==================== ANALYSIS ====================

@cli.command()
@click.option('--in', 'in_path', type=click.Path(exists=True), required=True, help='S2DC container')
@handle_errors
def inspect(in_path):
    """Print the container header and per-frame bits as JSON."""
    data = read_bytes(in_path)
    container = Container.from_bytes(data)
    report = analyze_container(data)
    click.echo(Utils.to_json({
        'header': container.header.to_dict(),
        'bytes': len(data),
        'report': report.to_dict(),
    }))


@cli.command('rd-report')
@click.option('--in', 'in_path', type=click.Path(exists=True), required=True, help='S2DC container')
@click.option('--reference', type=str, help='Reference frame directory or pattern for PSNR')
@click.option('--weights', '-w', type=click.Path(exists=True), help='Weights, needed with --reference')
@click.option('--chart', type=click.Path(), help='Write a per-frame bits chart (PNG)')
@click.option('--profile', '-p', default='desk', help='Configuration profile')
@click.option('--profiles-dir', type=click.Path(), help='Profile directory')
@click.option('--json', 'as_json', is_flag=True, help='Print the report as JSON')
@handle_errors
def rd_report(in_path, reference, weights, chart, profile, profiles_dir, as_json):
    """Bitrate report, with PSNR against reference frames when given."""
    data = read_bytes(in_path)
    report = analyze_container(data)

    if reference:
        if not weights:
            raise ConfigError("--reference needs --weights to decode the sequence")
        config = resolve_config(profile, profiles_dir)
        decoded = decode_sequence(data, WeightBundle.load(weights), config, with_vertices=False)
        report.psnr = sequence_psnr(decoded.frames, load_frames(list_frames(reference)))

    if chart:
        ChartGenerator().plot_frame_bits(report, chart)

    if as_json:
        click.echo(Utils.to_json(report.to_dict()))
    else:
        print_report(report, "📊 Rate Report")


@cli.command('rd-sweep')
@click.option('--input', '-i', 'input_source', required=True,
              help='Frame directory or glob pattern; the first frame is the key-reference')
@click.option('--weights', '-w', type=click.Path(exists=True), required=True, help='S2DW weight file')
@click.option('--anchor-weights', type=click.Path(exists=True),
              help='Second weight file swept as the anchor curve for BD-rate')
@click.option('--q-log2', 'q_values', default='4,5,6,7,8', show_default=True,
              help='Comma-separated q_log2 values')
@click.option('--profile', '-p', default='desk', help='Configuration profile')
@click.option('--profiles-dir', type=click.Path(), help='Profile directory')
@click.option('--chart', type=click.Path(), help='Write the RD curves (PNG)')
@click.option('--out', '-o', type=click.Path(), help='Write the curves as JSON')
@click.option('--json', 'as_json', is_flag=True, help='Print the curves as JSON')
@handle_errors
def rd_sweep_command(input_source, weights, anchor_weights, q_values, profile, profiles_dir,
                     chart, out, as_json):
    """Encode at several q_log2 values; curves and BD-rate against an anchor."""
    config = resolve_config(profile, profiles_dir)
    frames = load_frames(list_frames(input_source))
    q_list = parse_q_values(q_values)

    sources = {'test': weights}
    if anchor_weights:
        sources['anchor'] = anchor_weights
    curves = {}
    with Progress(SpinnerColumn(), TextColumn("[progress.description]{task.description}"),
                  console=err_console, transient=True) as progress:
        for name, path in sources.items():
            task = progress.add_task(f"Sweeping {name}...", total=None)
            curves[name] = rd_sweep(frames, config, WeightBundle.load(path), q_list)
            progress.update(task, completed=100)

    data = {
        'curves': {name: [p.to_dict() for p in points] for name, points in curves.items()},
        'bd_rate': None,
    }
    if 'anchor' in curves:
        data['bd_rate'] = bd_rate([p.point for p in curves['anchor']],
                                  [p.point for p in curves['test']])
    if chart:
        ChartGenerator().plot_rd_curves({n: [p.point for p in pts] for n, pts in curves.items()},
                                        chart)
    if out:
        Exporter().export_json(data, out)

    if as_json:
        click.echo(Utils.to_json(data))
        return
    table = Table(title="📈 Rate Sweep", show_header=True)
    for column in ("Curve", "q_log2", "kbps", "Keypoint kbps", "PSNR (dB)"):
        table.add_column(column)
    for name, points in curves.items():
        for p in points:
            table.add_row(name, str(p.q_log2), f"{p.kbps:.3f}", f"{p.keypoint_kbps:.3f}",
                          f"{p.psnr:.2f}")
    console.print(table)
    if data['bd_rate'] is not None:
        console.print(f"BD-rate (test vs anchor): [bold]{data['bd_rate']:+.2f}%[/]")


@cli.command('eval-losses')
@click.option('--in', 'in_path', type=click.Path(exists=True), required=True, help='S2DC container')
@click.option('--weights', '-w', type=click.Path(exists=True), required=True, help='S2DW weight file')
@click.option('--reference', required=True, help='Reference frame directory or glob pattern')
@click.option('--reference-vertices', type=click.Path(exists=True, file_okay=False), required=True,
              help='Directory of reference vertices_NNNNN.s2dv files')
@click.option('--shift', type=(float, float), default=(0.0, 0.0), show_default=True,
              help='Translation of the equivariance transform')
@click.option('--logits', type=click.Path(exists=True),
              help='Discriminator logits (.npy) for the adversarial term')
@click.option('--profile', '-p', default='desk', help='Configuration profile')
@click.option('--profiles-dir', type=click.Path(), help='Profile directory')
@click.option('--out', '-o', type=click.Path(), help='Write the loss report as JSON')
@click.option('--json', 'as_json', is_flag=True, help='Print the report as JSON')
@handle_errors
def eval_losses(in_path, weights, reference, reference_vertices, shift, logits, profile,
                profiles_dir, out, as_json):
    """Score a decoded container against reference frames and vertices."""
    config = resolve_config(profile, profiles_dir)
    data = read_bytes(in_path)
    count = Container.from_bytes(data).frames
    vertices_dir = Path(reference_vertices)
    vertices = [None] + [read_vertices(vertices_dir / f"vertices_{i:05d}.s2dv")
                         for i in range(1, count)]
    transform = AffineTransform([[1.0, 0.0, shift[0]], [0.0, 1.0, shift[1]]])

    breakdowns = evaluate_sequence(data, WeightBundle.load(weights),
                                   load_frames(list_frames(reference)), vertices,
                                   transform=transform, config=config,
                                   fake_logits=load_logits(logits) if logits else None)
    if out:
        Exporter().export_loss_report(breakdowns, out)

    if as_json:
        click.echo(Utils.to_json(loss_report(breakdowns)))
        return
    table = Table(title="🧮 Loss Report", show_header=True)
    for column in ("Frame", "equ", "kp", "per", "adv", "ver", "total"):
        table.add_column(column)
    for i, b in enumerate(breakdowns, start=1):
        table.add_row(str(i), *(f"{v:.5f}" for v in b.terms), f"{b.total:.5f}")
    console.print(table)


# ==================== SETUP ====================

@cli.command('init-weights')
@click.option('--out', '-o', type=click.Path(), required=True, help='Output S2DW file')
@click.option('--seed', type=int, default=0, help='Random seed')
@click.option('--zero', is_flag=True, help='All-zero weights')
@click.option('--profile', '-p', default='desk', help='Configuration profile')
@click.option('--profiles-dir', type=click.Path(), help='Profile directory')
@click.option('--depth', type=int, help='Keypoint depth slices D')
@handle_errors
def init_weights(out, seed, zero, profile, profiles_dir, depth):
    """Write seeded or zero weights for every network."""
    config = resolve_config(profile, profiles_dir, depth=depth)
    bundle = build_weights(config, seed=seed, zero=zero)
    path = bundle.save(out)
    console.print(f"[green]✅ Weights written:[/] {path} "
                  f"({len(bundle)} tensors, {bundle.parameter_count:,} parameters)")


@cli.command()
@click.option('--profiles-dir', type=click.Path(), help='Profile directory')
@click.option('--json', 'as_json', is_flag=True, help='Print as JSON')
@handle_errors
def profiles(profiles_dir, as_json):
    """List configuration profiles."""
    pm = ProfileManager(Path(profiles_dir) if profiles_dir else None)
    infos = [pm.get_profile_info(name) for name in pm.list_profiles()]
    infos = [info for info in infos if info]

    if as_json:
        click.echo(json.dumps(infos, indent=2))
        return

    table = Table(title="📋 Available Profiles", show_header=True)
    table.add_column("Name", style="cyan")
    table.add_column("Description", style="white")
    table.add_column("Overrides", style="green")
    for info in infos:
        overrides = ', '.join(f"{k}={v}" for k, v in info['settings'].items())
        table.add_row(info['name'], info['description'], overrides or '-')
    console.print(Panel.fit(f"{Config.APP_NAME} v{Config.APP_VERSION}", style="bold blue"))
    console.print(table)


@cli.command('new-profile')
@click.argument('name')
@click.option('--base', help='Profile whose settings the new one starts from')
@click.option('--description', default='', help='Short description')
@click.option('--q-log2', type=int, help='Keypoint quantization step exponent')
@click.option('--depth', type=int, help='Keypoint depth slices D')
@click.option('--fps', type=str, help='Frame rate as A/B')
@click.option('--yaml', 'as_yaml', is_flag=True, help='Write YAML instead of JSON')
@click.option('--profiles-dir', type=click.Path(), help='Profile directory')
@handle_errors
def new_profile(name, base, description, q_log2, depth, fps, as_yaml, profiles_dir):
    """Create and save a configuration profile."""
    fps_num, fps_den = Utils.parse_fps(fps) if fps else (None, None)
    settings = {k: v for k, v in dict(q_log2=q_log2, depth=depth,
                                      fps_num=fps_num, fps_den=fps_den).items() if v is not None}
    pm = ProfileManager(Path(profiles_dir) if profiles_dir else None)
    suffix = '.yaml' if as_yaml else '.json'
    profile = pm.create(name, base=base, description=description, suffix=suffix, **settings)
    console.print(f"[green]✅ Profile created:[/] {pm.profiles_dir / f'{name}{suffix}'} "
                  f"({len(profile.settings)} overrides)")


def main():
    """Main entry point."""
    cli(obj={})


if __name__ == '__main__':
    main()
