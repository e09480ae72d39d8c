from sqlalchemy import create_engine, ForeignKey, Column, Integer, String, Text, DateTime
from sqlalchemy.orm import sessionmaker, relationship, declarative_base
from sqlalchemy.sql import func

from config import DATABASE_URL

engine = create_engine(DATABASE_URL) if DATABASE_URL else None
SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)
Base = declarative_base()


class ExperimentRun(Base):
    __tablename__ = "experiment_runs"

    id = Column(Integer, primary_key=True, index=True)
    kind = Column(String, nullable=False, index=True)
    seed = Column(Integer, nullable=False)
    threads = Column(Integer, default=1)
    version = Column(String, nullable=False)
    config = Column(Text, nullable=False)
    summary = Column(Text, nullable=True)
    status = Column(String, default="ok")
    created_at = Column(DateTime, default=func.now())

    rows = relationship("ResultRow", back_populates="run", cascade="all, delete-orphan",
                        order_by="ResultRow.position")


class ResultRow(Base):
    __tablename__ = "result_rows"

    id = Column(Integer, primary_key=True, index=True)
    run_id = Column(Integer, ForeignKey("experiment_runs.id", ondelete="CASCADE"), nullable=False)
    position = Column(Integer, nullable=False)
    payload = Column(Text, nullable=False)

    run = relationship("ExperimentRun", back_populates="rows")


def connect(url: str):
    """Bind the session factory to ``url`` and create missing tables."""
    global engine
    if url.startswith("postgres://"):
        url = url.replace("postgres://", "postgresql://", 1)
    engine = create_engine(url)
    SessionLocal.configure(bind=engine)
    init_db()
    return SessionLocal


def init_db():
    Base.metadata.create_all(bind=engine)
