//! Command-line renderer: load a scene, run one engine, write the image and
//! the intersection-count statistics. `CRSH_LOG=info` enables stage logging.

use clap::{Parser, ValueEnum};
use crsh_core::pipeline::HashLayout;
use crsh_core::scene::load_scene;
use crsh_core::stats::{emit_stats, StatsFormat};
use crsh_core::tracer::{render, Engine, RenderOptions};
use crsh_core::Error as CoreError;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_IO: u8 = 3;
const EXIT_CONFIG_LIMIT: u8 = 4;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EngineArg {
    /// Every ray against every triangle
    Brute,
    /// Hierarchy over unsorted rays, no mesh culling
    Rah,
    /// Sorted rays, sphere-cone hierarchy, whole-mesh culling
    Crsh,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Engine {
        match e {
            EngineArg::Brute => Engine::Brute,
            EngineArg::Rah => Engine::Rah,
            EngineArg::Crsh => Engine::Crsh,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Parser, Debug)]
#[command(name = "crsh", version, about = "Whitted ray tracer with a coherent ray-space hierarchy")]
struct Args {
    /// Scene config (JSON)
    #[arg(long, required_unless_present = "gen_fixtures")]
    scene: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "crsh")]
    engine: EngineArg,

    /// Output image path (binary PPM, gamma 2.2)
    #[arg(long)]
    image: Option<PathBuf>,

    /// Statistics output path
    #[arg(long)]
    stats: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "json")]
    stats_format: FormatArg,

    /// Override the camera width
    #[arg(long)]
    width: Option<u32>,

    /// Override the camera height
    #[arg(long)]
    height: Option<u32>,

    /// Secondary-ray bounce depth (default: scene setting)
    #[arg(long)]
    bounces: Option<u32>,

    /// Hierarchy depth D (default: scene setting)
    #[arg(long)]
    levels: Option<u32>,

    /// Node branching B (default: scene setting)
    #[arg(long)]
    branching: Option<u32>,

    /// Worker threads (default: available parallelism); the output is
    /// identical for every value
    #[arg(long)]
    threads: Option<usize>,

    /// Seed for procedural fixture generation; rendering itself is
    /// deterministic and ignores it
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Hash field widths as light/theta/phi/originPerAxis/bounceTheta/bouncePhi
    /// (default 4/14/14/5/8/9)
    #[arg(long, value_name = "L/T/P/O/BT/BP")]
    hash_layout: Option<String>,

    /// Attach wall-clock per-stage timings to the stats output
    #[arg(long)]
    timings: bool,

    /// Use the literal published cone-sphere inequality (not conservative;
    /// for comparison runs only)
    #[arg(long)]
    literal_cone_test: bool,

    /// Write the procedural benchmark scenes into DIR and exit
    #[arg(long, value_name = "DIR")]
    gen_fixtures: Option<PathBuf>,

    /// Dump the G-buffer as four PPM images with this path prefix
    #[arg(long, value_name = "PREFIX")]
    dump_gbuffer: Option<PathBuf>,

    /// Dump the first ray batch's hierarchy node bounds as CSV
    #[arg(long, value_name = "PATH")]
    dump_hierarchy: Option<PathBuf>,

    /// Dump the first sorted batch's key/value arrays as CSV with this prefix
    #[arg(long, value_name = "PREFIX")]
    dump_pipeline: Option<PathBuf>,
}

fn parse_layout(spec: &str) -> Result<HashLayout, String> {
    let parts: Vec<&str> = spec.split('/').collect();
    if parts.len() != 6 {
        return Err(format!("hash layout needs 6 fields, got {}", parts.len()));
    }
    let mut v = [0u32; 6];
    for (dst, tok) in v.iter_mut().zip(&parts) {
        *dst = tok.parse().map_err(|_| format!("bad hash layout field {tok:?}"))?;
    }
    Ok(HashLayout {
        light_bits: v[0],
        theta_bits: v[1],
        phi_bits: v[2],
        origin_bits_per_axis: v[3],
        bounce_theta_bits: v[4],
        bounce_phi_bits: v[5],
    })
}

fn exit_code_for(err: &CoreError) -> u8 {
    if err.is_limit() {
        EXIT_CONFIG_LIMIT
    } else {
        EXIT_IO
    }
}

fn run(args: &Args) -> Result<(), (u8, String)> {
    if let Some(dir) = &args.gen_fixtures {
        let paths = crsh_core::fixtures::build_fixture_scenes(dir, args.seed)
            .map_err(|e| (exit_code_for(&e), e.to_string()))?;
        println!("wrote {}", paths.box_diffuse.display());
        println!("wrote {}", paths.box_mirror.display());
        println!("wrote {}", paths.rooms.display());
        println!("wrote {}", paths.slab.display());
        return Ok(());
    }

    let layout = match &args.hash_layout {
        Some(spec) => {
            let layout = parse_layout(spec).map_err(|msg| (EXIT_CONFIG_LIMIT, msg))?;
            layout.validate().map_err(|e| (EXIT_CONFIG_LIMIT, e.to_string()))?;
            Some(layout)
        }
        None => None,
    };

    let scene_path = args.scene.as_ref().expect("clap enforces --scene");
    let mut scene: crsh_core::SceneF =
        load_scene(scene_path).map_err(|e| (exit_code_for(&e), e.to_string()))?;
    if let Some(w) = args.width {
        scene.camera.width = w;
    }
    if let Some(h) = args.height {
        scene.camera.height = h;
    }

    let opts = RenderOptions {
        bounces: args.bounces,
        levels: args.levels,
        branching: args.branching,
        layout,
        literal_cone_test: args.literal_cone_test,
        collect_timings: args.timings,
        dump_hierarchy: args.dump_hierarchy.clone(),
        dump_pipeline: args.dump_pipeline.clone(),
    };

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(threads) = args.threads {
        pool = pool.num_threads(threads);
    }
    let pool = pool.build().map_err(|e| (EXIT_IO, format!("thread pool: {e}")))?;

    let engine: Engine = args.engine.into();
    let (image, report) = pool
        .install(|| render(&scene, engine, &opts))
        .map_err(|e| (exit_code_for(&e), e.to_string()))?;

    if let Some(path) = &args.image {
        image.save(path).map_err(|e| (EXIT_IO, e.to_string()))?;
    }
    if let Some(path) = &args.stats {
        let format = match args.stats_format {
            FormatArg::Json => StatsFormat::Json,
            FormatArg::Csv => StatsFormat::Csv,
        };
        emit_stats(&report, format, path).map_err(|e| (EXIT_IO, e.to_string()))?;
    }
    if let Some(prefix) = &args.dump_gbuffer {
        let gb = pool.install(|| crsh_core::gbuffer::render_gbuffer(&scene));
        crsh_core::gbuffer::dump_gbuffer(&gb, &scene, prefix).map_err(|e| (EXIT_IO, e.to_string()))?;
    }

    println!(
        "{}: {} intersection tests ({:.2}% of the {}-test brute-force equivalent)",
        report.engine, report.total_tests, report.relative_percent, report.brute_force_equivalent
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("CRSH_LOG")).init();
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
