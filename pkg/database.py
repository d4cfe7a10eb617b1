import json
import logging
import os
import sqlite3
import datetime

from config import DATABASE_PATH, REPORT_SCHEMA_VERSION

logger = logging.getLogger(__name__)


class ReportDatabase:
    """Optional sqlite store for calibration reports"""

    def __init__(self, path=DATABASE_PATH):
        self.path = path
        # Create data directory if it doesn't exist
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)

        # Check if we need to update the database schema
        self.db_exists = os.path.exists(path)

        self.conn = sqlite3.connect(path)
        self.cursor = self.conn.cursor()
        self.create_tables()

    def create_tables(self):
        """Create necessary tables if they don't exist"""
        self.cursor.execute('''
        CREATE TABLE IF NOT EXISTS reports (
            id INTEGER PRIMARY KEY AUTOINCREMENT,
            config_hash TEXT NOT NULL,
            scheme TEXT NOT NULL,
            alpha REAL NOT NULL,
            n_cal INTEGER NOT NULL,
            seed INTEGER NOT NULL,
            coverage REAL,
            efficiency REAL,
            quantile TEXT NOT NULL,
            error TEXT,
            schema INTEGER NOT NULL,
            created_at TEXT NOT NULL,
            UNIQUE(config_hash, scheme, alpha, n_cal, seed)
        )
        ''')

        if self.db_exists:
            self.cursor.execute("PRAGMA table_info(reports)")
            columns = [column[1] for column in self.cursor.fetchall()]
            if "error" not in columns:
                logger.info("Upgrading database: adding error column to reports table")
                self.cursor.execute("ALTER TABLE reports ADD COLUMN error TEXT")

        self.cursor.execute(
            "CREATE INDEX IF NOT EXISTS idx_reports_scheme ON reports(config_hash, scheme)"
        )
        self.conn.commit()

    def add_report(self, report):
        """Insert or replace one report; returns True on success"""
        try:
            # sqlite has no infinity literal in JSON text, so the quantile is stored as strings
            quantile = json.dumps([repr(float(q)) for q in report.quantile])
            self.cursor.execute(
                '''
                INSERT OR REPLACE INTO reports
                    (config_hash, scheme, alpha, n_cal, seed, coverage, efficiency, quantile,
                     error, schema, created_at)
                VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
                ''',
                (report.config_hash, report.scheme, report.alpha, report.n_cal, report.seed,
                 report.coverage, report.efficiency, quantile, report.error,
                 REPORT_SCHEMA_VERSION, datetime.datetime.now().isoformat(timespec="seconds")),
            )
            self.conn.commit()
            return True
        except sqlite3.Error as e:
            logger.error("Error storing report %s/%s: %s", report.scheme, report.seed, e)
            return False

    def get_reports(self, config_hash=None, scheme=None):
        """Stored rows as dicts, optionally filtered"""
        query = ("SELECT config_hash, scheme, alpha, n_cal, seed, coverage, efficiency, quantile, error "
                 "FROM reports")
        clauses, params = [], []
        if config_hash is not None:
            clauses.append("config_hash = ?")
            params.append(config_hash)
        if scheme is not None:
            clauses.append("scheme = ?")
            params.append(scheme)
        if clauses:
            query += " WHERE " + " AND ".join(clauses)
        query += " ORDER BY scheme, alpha, n_cal, seed"
        self.cursor.execute(query, params)

        rows = []
        for row in self.cursor.fetchall():
            rows.append({
                "config_hash": row[0],
                "scheme": row[1],
                "alpha": row[2],
                "n_cal": row[3],
                "seed": row[4],
                "coverage": row[5],
                "efficiency": row[6],
                "quantile": [float(q) for q in json.loads(row[7])],
                "error": row[8],
            })
        return rows

    def get_scheme_summary(self, config_hash):
        """Per scheme: run count, failures, mean coverage and mean efficiency of successful runs"""
        self.cursor.execute(
            '''
            SELECT scheme,
                   COUNT(*),
                   SUM(CASE WHEN error IS NOT NULL THEN 1 ELSE 0 END),
                   AVG(CASE WHEN error IS NULL THEN coverage END),
                   AVG(CASE WHEN error IS NULL THEN efficiency END)
            FROM reports
            WHERE config_hash = ?
            GROUP BY scheme
            ORDER BY scheme
            ''',
            (config_hash,),
        )
        return {
            row[0]: {"runs": row[1], "failures": row[2], "coverage": row[3], "efficiency": row[4]}
            for row in self.cursor.fetchall()
        }

    def close(self):
        self.conn.close()
