//! `gen-synth`: a synthetic scene in COLMAP text form plus rendered images.

use std::path::{Path, PathBuf};

use psforge::patch::image::encode_pnm;
use psforge::scene::{write_scene_dir, SceneModel};
use psforge::synth::{generate_scene, render_view, SynthConfig};
use rayon::prelude::*;

use crate::error::{write_file, CliError};

pub const SCENE_SUBDIR: &str = "scene";
pub const IMAGES_SUBDIR: &str = "images";

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub scene_dir: PathBuf,
    pub images_dir: Option<PathBuf>,
    pub scene: SceneModel,
}

pub fn load_synth_config(text: &str) -> Result<SynthConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

/// Writes `<out>/scene/{cameras,images,points3D}.txt` and, when requested,
/// one PPM per view under `<out>/images`.
pub fn cmd_gen_synth(cfg: &SynthConfig, out: &Path, render: bool) -> Result<SynthOutput, CliError> {
    let scene = generate_scene(cfg)?;
    let scene_dir = out.join(SCENE_SUBDIR);
    std::fs::create_dir_all(&scene_dir).map_err(|e| CliError::io(&scene_dir, e))?;
    write_scene_dir(&scene, &scene_dir)?;
    let images_dir = if render {
        let dir = out.join(IMAGES_SUBDIR);
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        scene
            .views
            .par_iter()
            .map(|(&id, view)| {
                let img = render_view(&scene, id).expect("view exists");
                write_file(&dir.join(&view.name), encode_pnm(&img))
            })
            .collect::<Result<Vec<()>, CliError>>()?;
        Some(dir)
    } else {
        None
    };
    Ok(SynthOutput {
        scene_dir,
        images_dir,
        scene,
    })
}
