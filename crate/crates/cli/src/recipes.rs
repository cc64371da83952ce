//! Bundled experiment recipes. The files live in `recipes/` at the workspace
//! root and are compiled in, so `--config prop21` works from anywhere.

pub struct Recipe {
    pub name: &'static str,
    pub file: &'static str,
    pub description: &'static str,
    pub text: &'static str,
}

macro_rules! recipe {
    ($name:literal, $desc:literal) => {
        Recipe {
            name: $name,
            file: concat!("recipes/", $name, ".cfg"),
            description: $desc,
            text: include_str!(concat!("../../../recipes/", $name, ".cfg")),
        }
    };
}

pub const CATALOG: &[Recipe] = &[
    recipe!("prop21", "Kerr: the restricted determinant vanishes on both horizon ellipses"),
    recipe!("prop22", "Kerr: restricted ergosphere inside the ergosphere, touching on the axis"),
    recipe!("prop23", "Kerr: a bump off the horizon breaks every closed characteristic"),
    recipe!("prop24", "Kerr: a one-parameter family of metrics with prescribed ellipse horizons"),
    recipe!("prop25", "designed metric whose horizon is a prescribed perturbed circle"),
    recipe!("schwarzschild_bound", "Schwarzschild: wave sup-norm stays bounded outside the horizon"),
    recipe!("travel_time_divergence", "draining flow: travel time grows like -log of the distance to the ergosphere"),
    recipe!("echo_delay", "flat half-space: boundary echo delay is twice the depth"),
];

pub fn bundled(name: &str) -> Option<&'static Recipe> {
    let name = name.strip_prefix("recipes/").unwrap_or(name);
    let name = name.strip_suffix(".cfg").unwrap_or(name);
    CATALOG.iter().find(|r| r.name == name)
}

pub fn listing() -> String {
    let w = CATALOG.iter().map(|r| r.name.len()).max().unwrap_or(0);
    CATALOG.iter().map(|r| format!("{:w$}  {}  ({})\n", r.name, r.description, r.file)).collect()
}
