use crate::geometry::*;
use crate::{EnvState, SeedPlace, IMAGE_PIXELS, IMAGE_SIZE};

const BACKGROUND: f64 = 0.1;
const DISH: f64 = 0.3;
const TUBE: f64 = 0.5;
const TARGET_TUBE: f64 = 0.7;
const SEED_BASE: f64 = 0.9;
const GRIPPER: f64 = 1.0;

fn to_cell(v: f64) -> usize {
    ((v * IMAGE_SIZE as f64).floor() as isize).clamp(0, IMAGE_SIZE as isize - 1) as usize
}

fn cell_center(i: usize) -> f64 {
    (i as f64 + 0.5) / IMAGE_SIZE as f64
}

fn paint_disk(image: &mut [f64], center: [f64; 2], radius: f64, value: f64) {
    let r2 = radius * radius;
    for row in 0..IMAGE_SIZE {
        for col in 0..IMAGE_SIZE {
            let dx = cell_center(col) - center[0];
            let dy = cell_center(row) - center[1];
            if dx * dx + dy * dy <= r2 {
                image[row * IMAGE_SIZE + col] = value;
            }
        }
    }
    // small disks still occupy at least the cell containing their center
    image[to_cell(center[1]) * IMAGE_SIZE + to_cell(center[0])] = value;
}

/// Top-down 32x32 grayscale view of the workspace.
///
/// Painted back to front: background, dish, tubes (target brighter),
/// seeds, gripper. When the gripper is lowered or closing (z < 0.5 or
/// g < 0.5) it is a solid 3x3 block that hides whatever is underneath —
/// in particular whether a seed sits between the fingers. Raised and
/// open, only the four fingertip corners are drawn, so a seed under or
/// next to the hovering gripper stays visible while it aligns.
pub fn render_image(state: &EnvState) -> Vec<f64> {
    let mut image = vec![BACKGROUND; IMAGE_PIXELS];

    paint_disk(&mut image, state.dish_center, state.dish_radius, DISH);
    for tube in 0..4 {
        let value = if tube == state.target_tube as usize { TARGET_TUBE } else { TUBE };
        paint_disk(&mut image, tube_position(tube), TUBE_RADIUS, value);
    }
    for seed in &state.seeds {
        if seed.place == SeedPlace::Tube {
            continue;
        }
        paint_disk(&mut image, seed.pos, seed.radius(), SEED_BASE * seed.contrast);
    }

    let occluding = state.gripper[2] < 0.5 || state.gripper[3] < 0.5;
    let gc = to_cell(state.gripper[0]) as isize;
    let gr = to_cell(state.gripper[1]) as isize;
    for dr in -1isize..=1 {
        for dc in -1isize..=1 {
            if !occluding && (dr == 0 || dc == 0) {
                continue; // open fingertips only: corners of the block
            }
            let row = gr + dr;
            let col = gc + dc;
            if (0..IMAGE_SIZE as isize).contains(&row) && (0..IMAGE_SIZE as isize).contains(&col) {
                image[row as usize * IMAGE_SIZE + col as usize] = GRIPPER;
            }
        }
    }
    image
}
