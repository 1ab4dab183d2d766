use super::types::GridPos;
use super::world::World;

fn glyph(world: &World, p: GridPos) -> String {
    if world.agent.pos == p {
        return if world.agent.harmed { "X " } else { "@ " }.to_string();
    }
    if let Some(t) = world.trolley_at(p) {
        return if t.active { "T " } else { "t " }.to_string();
    }
    if let Some(c) = world.character_at(p) {
        let letter = if c.harmed {
            c.kind.glyph().to_ascii_lowercase()
        } else {
            c.kind.glyph()
        };
        let count = if c.quantity > 9 {
            '+'
        } else {
            char::from_digit(c.quantity, 10).unwrap_or('?')
        };
        return format!("{letter}{count}");
    }
    if let Some(l) = world.lever_at(p) {
        return format!("L{}", l.state);
    }
    if world.landmark == p {
        return "G ".to_string();
    }
    if let Some(s) = world.switch_at(p) {
        return format!("S{}", s.active_index);
    }
    if world.is_rail(p) {
        return "--".to_string();
    }
    if world.is_blocked(p) {
        return "##".to_string();
    }
    ". ".to_string()
}

/// Two characters per cell, one line per row, rows top to bottom.
pub fn render_ascii(world: &World) -> String {
    let mut lines = Vec::with_capacity(world.height() as usize);
    for y in 0..world.height() as i32 {
        let mut line = String::with_capacity(world.width() as usize * 2);
        for x in 0..world.width() as i32 {
            line.push_str(&glyph(world, GridPos::new(x, y)));
        }
        lines.push(line);
    }
    lines.join("\n")
}
