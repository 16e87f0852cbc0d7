use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;

use crate::config::{config_hash, parse_levels, parse_triple, ConvergenceConfig, PhysicsKind, RunConfig};
use mpxa::assembly::boundary_data;
use mpxa::coupled::{discretize_biot, discretize_thermo, BiotParams, BlockSystem, Field, ThermoParams};
use mpxa::mesh::{build_subgrid, generate_mesh, load_mesh, save_mesh, Mesh, MeshKind, MeshSpec, Quadrature};
use mpxa::mpfa::discretize_darcy;
use mpxa::mpsa::discretize_elasticity;
use mpxa::physics::{scaled, BoundarySpec, SymmetryMode, Tensor2, IDENTITY};
use mpxa::verify::{
    convergence_study, make_case, monotonicity_check, solve_case, CaseName, CaseParams, DiscOptions, GridFamily,
    MonotonicityMode, Physics,
};
use mpxa::SparseMatrix;

fn header(hash: &str) -> String {
    format!("# config-hash: {hash}\n")
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn mesh_gen(kind: &str, n: usize, perturbation: f64, seed: u64, out: &Path) -> Result<()> {
    let kind: MeshKind = kind.parse()?;
    let mesh = generate_mesh(&MeshSpec::perturbed(kind, n, perturbation, seed))?;
    save_mesh(&mesh, out)?;
    Ok(())
}

fn kappa_from(s: &str) -> Result<Tensor2> {
    let [xx, xy, yy] = parse_triple(s)?;
    Ok([[xx, xy], [xy, yy]])
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[arg(long, conflicts_with_all = ["physics", "mesh"])]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub physics: Option<PhysicsKind>,
    /// Mesh JSON file.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Analytic case supplying sources and boundary data.
    #[arg(long)]
    pub case: Option<String>,
    /// `c0,cx,cy` for Dirichlet data `c0 + cx x + cy y`.
    #[arg(long)]
    pub dirichlet_linear: Option<String>,
    /// Permeability `kxx,kxy,kyy`.
    #[arg(long)]
    pub kappa: Option<String>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn case_physics(p: Physics) -> PhysicsKind {
    match p {
        Physics::Darcy => PhysicsKind::Darcy,
        Physics::Elasticity => PhysicsKind::Elasticity,
        Physics::Biot => PhysicsKind::Biot,
        Physics::Thermo => PhysicsKind::Thermo,
    }
}

pub fn run(args: RunArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => {
            let Some(physics) = args.physics else { bail!("run needs --config or --physics") };
            let Some(mesh) = args.mesh.clone() else { bail!("run needs --mesh with --physics") };
            RunConfig {
                physics,
                mesh: None,
                mesh_path: Some(mesh),
                case: None,
                params: CaseParams::default(),
                options: DiscOptions::default(),
                dirichlet_linear: None,
                out: None,
            }
        }
    };
    if let Some(c) = &args.case {
        cfg.case = Some(c.parse()?);
    }
    if let Some(d) = &args.dirichlet_linear {
        cfg.dirichlet_linear = Some(parse_triple(d)?);
    }
    if let Some(k) = &args.kappa {
        cfg.params.kappa = kappa_from(k)?;
    }
    if let Some(eta) = args.eta {
        cfg.options.eta = eta;
    }
    if args.out.is_some() {
        cfg.out = args.out.clone();
    }
    let mesh = cfg.mesh()?;
    let csv = run_config(&cfg, &mesh)?;
    emit(cfg.out.as_deref(), &csv)
}

fn run_config(cfg: &RunConfig, mesh: &Mesh) -> Result<String> {
    let mut cols: Vec<(&str, Vec<f64>)> = Vec::new();
    if let Some(name) = cfg.case {
        let case = make_case(name, cfg.params.clone())?;
        if case_physics(case.physics) != cfg.physics {
            bail!("case {name} is not a {:?} problem", cfg.physics);
        }
        let sol = solve_case(&case, mesh, &cfg.options)?;
        if let Some(u) = sol.u {
            cols.push(("ux", u.iter().step_by(2).copied().collect()));
            cols.push(("uy", u.iter().skip(1).step_by(2).copied().collect()));
        }
        if let Some(p) = sol.p {
            cols.push(("p", p));
        }
        if let Some(phi) = sol.phi {
            cols.push(("phi", phi));
        }
    } else {
        if cfg.physics != PhysicsKind::Darcy {
            bail!("{:?} runs need a 'case'", cfg.physics);
        }
        cols.push(("p", linear_darcy(cfg, mesh)?));
    }
    let mut s = header(&cfg.hash());
    s.push_str("cell,x,y");
    for (name, _) in &cols {
        s.push(',');
        s.push_str(name);
    }
    s.push('\n');
    for (k, x) in mesh.cell_centers.iter().enumerate() {
        let _ = write!(s, "{k},{:.16e},{:.16e}", x[0], x[1]);
        for (_, v) in &cols {
            let _ = write!(s, ",{:.16e}", v[k]);
        }
        s.push('\n');
    }
    Ok(s)
}

/// Darcy with zero source and boundary data from a linear pressure field.
fn linear_darcy(cfg: &RunConfig, mesh: &Mesh) -> Result<Vec<f64>> {
    let [c0, cx, cy] = cfg.dirichlet_linear.unwrap_or([0.0; 3]);
    let k = cfg.params.kappa;
    let sg = build_subgrid(mesh, cfg.options.eta, cfg.options.quadrature)?;
    let bc = BoundarySpec::from_mesh(mesh);
    let nc = mesh.num_cells();
    let st = discretize_darcy(mesh, &sg, &vec![k; nc], &bc)?;
    let flux = [-(k[0][0] * cx + k[0][1] * cy), -(k[1][0] * cx + k[1][1] * cy)];
    let data = boundary_data(
        mesh,
        &sg,
        &bc,
        1,
        |x| vec![c0 + cx * x[0] + cy * x[1]],
        |_, n| vec![flux[0] * n[0] + flux[1] * n[1]],
    );
    Ok(st.solve(mesh, &vec![0.0; nc], &vec![0.0; 2 * nc], &data)?)
}

fn write_matrix(dir: &Path, name: &str, hash: &str, m: &SparseMatrix) -> Result<()> {
    let mut s = header(hash);
    s.push_str(&m.to_coordinate_string());
    let path = dir.join(format!("{name}.mtx"));
    fs::write(&path, s).with_context(|| format!("writing {}", path.display()))
}

fn field_name(f: Field) -> &'static str {
    match f {
        Field::U => "u",
        Field::P => "p",
        Field::Phi => "phi",
    }
}

fn write_blocks(dir: &Path, hash: &str, sys: &BlockSystem) -> Result<()> {
    for (&(r, c), m) in &sys.blocks {
        write_matrix(dir, &format!("block_{}_{}", field_name(r), field_name(c)), hash, m)?;
    }
    write_matrix(dir, "system", hash, &sys.matrix())
}

pub fn discretize(config: &Path, out_dir: &Path) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let hash = cfg.hash();
    let mesh = cfg.mesh()?;
    let sg = build_subgrid(&mesh, cfg.options.eta, cfg.options.quadrature)?;
    let bc = BoundarySpec::from_mesh(&mesh);
    let nc = mesh.num_cells();
    let p = &cfg.params;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    match cfg.physics {
        PhysicsKind::Darcy => {
            let st = discretize_darcy(&mesh, &sg, &vec![p.kappa; nc], &bc)?;
            for (name, m) in [("q_p", &st.q_p), ("q_g", &st.q_g), ("q_bc", &st.q_bc), ("div", &st.div)] {
                write_matrix(out_dir, name, &hash, m)?;
            }
            write_matrix(out_dir, "system", &hash, &st.system_matrix())?;
        }
        PhysicsKind::Elasticity => {
            let st = discretize_elasticity(&mesh, &sg, &vec![p.lame; nc], cfg.options.mode, &bc)?;
            for (name, m) in [("w_u", &st.w_u), ("w_chi", &st.w_chi), ("w_bc", &st.w_bc), ("div", &st.div)] {
                write_matrix(out_dir, name, &hash, m)?;
            }
            write_matrix(out_dir, "system", &hash, &st.system_matrix())?;
        }
        PhysicsKind::Biot => {
            let mut bp = BiotParams::uniform(nc, scaled(IDENTITY, p.alpha), p.c, p.theta, p.kappa, p.lame);
            bp.mode = cfg.options.mode;
            let d = discretize_biot(&mesh, &sg, &bp, &bc, &bc)?;
            write_matrix(out_dir, "j_p", &hash, &d.j_p)?;
            write_blocks(out_dir, &hash, &d.blocks)?;
        }
        PhysicsKind::Thermo => {
            let mut tp = ThermoParams::unit(nc, p.advection);
            tp.mode = cfg.options.mode;
            tp.theta = p.theta;
            let d = discretize_thermo(&mesh, &sg, &tp, &bc, &bc, &bc)?;
            write_blocks(out_dir, &hash, &d.blocks)?;
        }
    }
    let cfg_json = serde_json::to_string_pretty(&cfg)?;
    fs::write(out_dir.join("config.json"), format!("{cfg_json}\n"))?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeArg {
    Weak,
    Strong,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum QuadArg {
    SinglePoint,
    FullQuadratic,
}

#[derive(Args, Debug)]
pub struct ConvergenceArgs {
    #[arg(long)]
    pub case: String,
    /// Mesh kind, or `skewed` / `layered`.
    #[arg(long, default_value = "cartesian")]
    pub grid: String,
    #[arg(long, default_value = "3..6")]
    pub levels: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Defaults to 0.3 for perturbed quads and Voronoi polygons, 0 otherwise.
    #[arg(long)]
    pub perturbation: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Shear of the `skewed` family.
    #[arg(long, default_value_t = 1.0)]
    pub skew: f64,
    /// Layer refinement of the `layered` family.
    #[arg(long, default_value_t = 4)]
    pub ratio: usize,
    #[arg(long, value_enum)]
    pub advection: Option<OnOff>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub contrast: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub eta: f64,
    #[arg(long, value_enum, default_value = "single-point")]
    pub quadrature: QuadArg,
    #[arg(long, value_enum, default_value = "weak")]
    pub mode: ModeArg,
    /// Use the two-point scheme (Darcy cases).
    #[arg(long)]
    pub tpfa: bool,
}

pub fn convergence(args: ConvergenceArgs) -> Result<()> {
    let name: CaseName = args.case.parse()?;
    let mut params = CaseParams::default();
    if let Some(a) = args.advection {
        params.advection = a == OnOff::On;
    }
    if let Some(t) = args.theta {
        params.theta = t;
    }
    if let Some(c) = args.c {
        params.c = c;
    }
    if let Some(k) = args.contrast {
        params.contrast = k;
    }
    let case = make_case(name, params.clone())?;
    let grid = match args.grid.as_str() {
        "skewed" => GridFamily::Skewed { skew: args.skew },
        "layered" => GridFamily::Layered { ratio: args.ratio },
        other => {
            let kind: MeshKind = other.parse()?;
            let default = match kind {
                MeshKind::PerturbedQuad | MeshKind::VoronoiPolygon => 0.3,
                _ => 0.0,
            };
            GridFamily::for_case(&case, kind, args.perturbation.unwrap_or(default), args.seed)
        }
    };
    let options = DiscOptions {
        eta: args.eta,
        quadrature: match args.quadrature {
            QuadArg::SinglePoint => Quadrature::SinglePoint,
            QuadArg::FullQuadratic => Quadrature::FullQuadratic,
        },
        mode: match args.mode {
            ModeArg::Weak => SymmetryMode::Weak,
            ModeArg::Strong => SymmetryMode::Strong,
        },
        tpfa: args.tpfa,
        ..Default::default()
    };
    let levels = parse_levels(&args.levels)?;
    let cfg = ConvergenceConfig { case: name, grid, levels: levels.clone(), params, options: options.clone() };
    let table = convergence_study(&case, &grid, &levels, &options)?;
    let mut s = header(&config_hash(&cfg));
    s.push_str(&table.to_csv());
    emit(args.out.as_deref(), &s)
}

#[derive(Args, Debug)]
pub struct MonotoneArgs {
    #[arg(long, conflicts_with_all = ["mesh", "kind"])]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    /// Permeability `kxx,kxy,kyy`.
    #[arg(long)]
    pub kappa: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    pub eta: f64,
    /// Also check the sign of the dense inverse.
    #[arg(long)]
    pub inverse: bool,
}

pub fn check_monotone(args: MonotoneArgs) -> Result<()> {
    let (mesh, mut kappa, eta, quadrature) = match &args.config {
        Some(path) => {
            let cfg = RunConfig::load(path)?;
            (cfg.mesh()?, cfg.params.kappa, cfg.options.eta, cfg.options.quadrature)
        }
        None => {
            let mesh = match &args.mesh {
                Some(p) => load_mesh(p)?,
                None => {
                    let kind: MeshKind = args.kind.as_deref().unwrap_or("cartesian").parse()?;
                    generate_mesh(&MeshSpec::new(kind, args.n))?
                }
            };
            (mesh, IDENTITY, args.eta, Quadrature::SinglePoint)
        }
    };
    if let Some(k) = &args.kappa {
        kappa = kappa_from(k)?;
    }
    let sg = build_subgrid(&mesh, eta, quadrature)?;
    let bc = BoundarySpec::dirichlet(&mesh);
    let st = discretize_darcy(&mesh, &sg, &vec![kappa; mesh.num_cells()], &bc)?;
    let mode = if args.inverse { MonotonicityMode::InversePositivity } else { MonotonicityMode::MMatrix };
    let r = monotonicity_check(&st.system_matrix(), mode)?;
    println!("M-matrix: {}", if r.m_matrix { "yes" } else { "no" });
    if let Some(min) = r.min_inverse {
        println!("min inverse entry: {min:.6e}");
    }
    if let Some(class) = r.class {
        println!("class: {}", serde_json::to_value(class)?.as_str().unwrap_or_default());
    }
    Ok(())
}
