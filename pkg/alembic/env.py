from logging.config import fileConfig
from sqlalchemy import engine_from_config, pool
from alembic import context
from config import DATABASE_URL
from db_config import Base

config = context.config

if config.config_file_name is not None:
    fileConfig(config.config_file_name)

# The ledger URL comes from AVGSAMP_DATABASE_URL (.env or environment)
if not DATABASE_URL:
    raise RuntimeError("AVGSAMP_DATABASE_URL must be set to run ledger migrations")
config.set_main_option("sqlalchemy.url", DATABASE_URL)

target_metadata = Base.metadata


def run_migrations_offline():
    """Emit the migration SQL without a database connection."""
    url = config.get_main_option("sqlalchemy.url")
    context.configure(url=url, target_metadata=target_metadata, literal_binds=True)

    with context.begin_transaction():
        context.run_migrations()


def run_migrations_online():
    connectable = engine_from_config(
        config.get_section(config.config_ini_section),
        prefix="sqlalchemy.",
        poolclass=pool.NullPool,
    )

    with connectable.connect() as connection:
        context.configure(connection=connection, target_metadata=target_metadata, render_as_batch=True)

        with context.begin_transaction():
            context.run_migrations()


if context.is_offline_mode():
    run_migrations_offline()
else:
    run_migrations_online()
