use std::sync::Arc;

use derender::scene::{apply_edit, invert_edit, EditKind, EditOp, Scene};
use serde::Serialize;

/// One undoable step: the op, its inverse when it has one, and the scene
/// it was applied to.
#[derive(Debug, Clone)]
struct UndoEntry {
    op: EditOp,
    inverse: Option<EditOp>,
    before: Arc<Scene>,
}

/// An editing session: the current scene, its undo stack and a revision
/// counter that increases on every mutation.
#[derive(Debug)]
pub struct Session {
    pub id: String,
    scene: Arc<Scene>,
    undo: Vec<UndoEntry>,
    revision: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EditOutcome {
    pub revision: u64,
    /// The edited object, or the new copy for a duplicate.
    pub changed_object: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UndoOutcome {
    pub revision: u64,
    /// The op that was undone.
    pub undone: EditOp,
    /// Its inverse, for moves.
    pub inverse: Option<EditOp>,
}

impl Session {
    pub fn new(id: String, scene: Scene) -> Self {
        Self {
            id,
            scene: Arc::new(scene),
            undo: Vec::new(),
            revision: 0,
        }
    }

    pub fn scene(&self) -> Arc<Scene> {
        self.scene.clone()
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn undo_depth(&self) -> usize {
        self.undo.len()
    }

    pub fn apply(&mut self, op: EditOp) -> derender::Result<EditOutcome> {
        let next = apply_edit(&self.scene, &op)?;
        let changed_object = match op.kind {
            EditKind::Duplicate => next.objects.last().map_or(op.object_id, |o| o.id),
            _ => op.object_id,
        };
        let inverse = invert_edit(&op).ok();
        let before = std::mem::replace(&mut self.scene, Arc::new(next));
        self.undo.push(UndoEntry { op, inverse, before });
        self.revision += 1;
        Ok(EditOutcome {
            revision: self.revision,
            changed_object,
        })
    }

    /// Reverts the latest edit, or None when there is nothing to undo.
    ///
    /// The pre-edit scene is restored from its snapshot, so renders match
    /// the earlier revision byte for byte; replaying the inverse op instead
    /// would agree only to rounding.
    pub fn undo(&mut self) -> Option<UndoOutcome> {
        let entry = self.undo.pop()?;
        self.scene = entry.before;
        self.revision += 1;
        Some(UndoOutcome {
            revision: self.revision,
            undone: entry.op,
            inverse: entry.inverse,
        })
    }
}
