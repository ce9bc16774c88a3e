//! Worker threads with per-worker FIFO queues of dirty nodes and stealing.
//!
//! A node is queued at most once at a time. `pending` counts queued nodes
//! plus nodes being visited; a fact can only be produced while some node is
//! being visited, so `pending == 0` with every queue empty is quiescence.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering::SeqCst};
use std::sync::{Arc, Barrier, Mutex, RwLock};
use std::time::Duration;

use super::audit::{self, Snapshot};
use super::{Graph, RunConfig, RunReport, RuntimeError, Status, TraceEvent};
use crate::database::NodeDatabase;
use crate::engine::{commit, Engine};
use crate::ir::Fact;
use crate::value::NodeId;

struct Cell {
    db: Mutex<NodeDatabase>,
    inbox: Mutex<VecDeque<Fact>>,
    owner: AtomicUsize,
    queued: AtomicBool,
}

impl Cell {
    fn new(db: NodeDatabase, owner: usize) -> Arc<Cell> {
        Arc::new(Cell {
            db: Mutex::new(db),
            inbox: Mutex::new(VecDeque::new()),
            owner: AtomicUsize::new(owner),
            queued: AtomicBool::new(false),
        })
    }
}

struct Shared<'c> {
    engine: Engine,
    cfg: &'c RunConfig,
    num_preds: usize,
    cells: RwLock<HashMap<NodeId, Arc<Cell>>>,
    queues: Vec<Mutex<VecDeque<NodeId>>>,
    pending: AtomicUsize,
    steps: AtomicU64,
    audited: AtomicU64,
    fired: Vec<AtomicU64>,
    abort: AtomicBool,
    limit_hit: AtomicBool,
    error: Mutex<Option<RuntimeError>>,
    trace: Mutex<Vec<TraceEvent>>,
}

pub(super) fn run(graph: Graph, cfg: &RunConfig) -> Result<RunReport, RuntimeError> {
    let workers = cfg.workers.max(1);
    let engine = Engine::new(graph.program.clone(), graph.world(), cfg.seed, graph.first_fresh());
    let program = graph.program.clone();
    let n = graph.nodes.len();
    let shared = Shared {
        engine,
        cfg,
        num_preds: program.preds.len(),
        cells: RwLock::new(HashMap::new()),
        queues: (0..workers).map(|_| Mutex::new(VecDeque::new())).collect(),
        pending: AtomicUsize::new(0),
        steps: AtomicU64::new(0),
        audited: AtomicU64::new(0),
        fired: (0..workers).map(|_| AtomicU64::new(0)).collect(),
        abort: AtomicBool::new(false),
        limit_hit: AtomicBool::new(false),
        error: Mutex::new(None),
        trace: Mutex::new(Vec::new()),
    };
    {
        let mut cells = shared.cells.write().unwrap();
        for (i, (id, db)) in graph.nodes.into_iter().enumerate() {
            // Contiguous ranges of ids per worker.
            let owner = i * workers / n.max(1);
            let cell = Cell::new(db, owner);
            cells.insert(id, cell.clone());
            shared.schedule(id, &cell);
        }
    }
    if workers == 1 {
        shared.work(0);
    } else {
        // Nobody starts before everybody can steal.
        let start = Barrier::new(workers);
        std::thread::scope(|s| {
            for w in 0..workers {
                let (shared, start) = (&shared, &start);
                s.spawn(move || {
                    start.wait();
                    shared.work(w)
                });
            }
        });
    }
    if let Some(e) = shared.error.lock().unwrap().take() {
        return Err(e);
    }
    let mut nodes = std::collections::BTreeMap::new();
    for (id, cell) in shared.cells.into_inner().unwrap() {
        let cell = Arc::try_unwrap(cell).unwrap_or_else(|_| panic!("workers have exited"));
        let mut db = cell.db.into_inner().unwrap();
        // Only non-empty after an abort.
        for f in cell.inbox.into_inner().unwrap() {
            db.assert_fact(f).map_err(|source| RuntimeError::Database { node: id, source })?;
        }
        nodes.insert(id, db);
    }
    Ok(RunReport {
        graph: Graph { program, nodes },
        status: if shared.limit_hit.load(SeqCst) { Status::StepLimit } else { Status::Quiescent },
        steps: shared.steps.load(SeqCst).min(cfg.max_steps.unwrap_or(u64::MAX)),
        fired: shared.fired.iter().map(|f| f.load(SeqCst)).collect(),
        trace: shared.trace.into_inner().unwrap(),
        audited: shared.audited.load(SeqCst),
    })
}

impl Shared<'_> {
    fn schedule(&self, id: NodeId, cell: &Cell) {
        if !cell.queued.swap(true, SeqCst) {
            self.pending.fetch_add(1, SeqCst);
            let owner = cell.owner.load(SeqCst);
            self.queues[owner].lock().unwrap().push_back(id);
        }
    }

    fn work(&self, me: usize) {
        let mut idle = 0u32;
        while !self.abort.load(SeqCst) {
            let next = self.queues[me].lock().unwrap().pop_front().or_else(|| self.steal(me));
            match next {
                Some(id) => {
                    idle = 0;
                    if let Err(e) = self.visit(me, id) {
                        self.error.lock().unwrap().get_or_insert(e);
                        self.abort.store(true, SeqCst);
                    }
                    self.pending.fetch_sub(1, SeqCst);
                }
                None if self.pending.load(SeqCst) == 0 => break,
                None => {
                    idle += 1;
                    if idle < 100 {
                        std::thread::yield_now();
                    } else {
                        std::thread::sleep(Duration::from_micros(50));
                    }
                }
            }
        }
    }

    /// Takes the newest node of the longest other queue.
    fn steal(&self, me: usize) -> Option<NodeId> {
        let victim = (0..self.queues.len())
            .filter(|&w| w != me)
            .max_by_key(|&w| self.queues[w].lock().unwrap().len())?;
        let id = self.queues[victim].lock().unwrap().pop_back()?;
        if let Some(cell) = self.cells.read().unwrap().get(&id) {
            cell.owner.store(me, SeqCst);
        }
        Some(id)
    }

    fn cell(&self, id: NodeId, me: usize) -> Arc<Cell> {
        if let Some(c) = self.cells.read().unwrap().get(&id) {
            return c.clone();
        }
        let mut cells = self.cells.write().unwrap();
        cells.entry(id).or_insert_with(|| Cell::new(NodeDatabase::new(id, self.num_preds), me)).clone()
    }

    /// Delivers the inbox, then fires rules until none applies.
    fn visit(&self, me: usize, id: NodeId) -> Result<(), RuntimeError> {
        let cell = self.cell(id, me);
        cell.queued.store(false, SeqCst);
        let mut db = cell.db.lock().unwrap();
        let arrived: Vec<Fact> = cell.inbox.lock().unwrap().drain(..).collect();
        for f in arrived {
            db.assert_fact(f).map_err(|source| RuntimeError::Database { node: id, source })?;
        }
        while !self.abort.load(SeqCst) {
            let Some(o) = self.engine.step(&db)? else { break };
            let prev = self.steps.fetch_add(1, SeqCst);
            if self.cfg.max_steps.is_some_and(|m| prev >= m) {
                self.limit_hit.store(true, SeqCst);
                self.abort.store(true, SeqCst);
                break;
            }
            let before = self.cfg.audit.then(|| Snapshot::of(&db));
            let remote = commit(&mut db, &o)?;
            if let Some(before) = before {
                audit::check(&before, &o, &db).map_err(|detail| RuntimeError::Audit { node: id, rule: o.rule, detail })?;
                self.audited.fetch_add(1, SeqCst);
            }
            self.fired[me].fetch_add(1, SeqCst);
            if self.cfg.trace {
                self.trace.lock().unwrap().push(TraceEvent {
                    worker: me,
                    node: id,
                    rule: o.rule,
                    consumed: o.consumed.iter().map(|(_, f)| f.clone()).collect(),
                    derived: o.derived.clone(),
                });
            }
            for &n in &o.new_nodes {
                self.cell(n, me);
            }
            for f in remote {
                let target = f.home();
                let c = self.cell(target, me);
                c.inbox.lock().unwrap().push_back(f);
                self.schedule(target, &c);
            }
        }
        db.clear_dirty();
        Ok(())
    }
}
