from abc import ABC, abstractmethod
from functools import lru_cache
from typing import Any, Dict, Generic, List, Optional, Type, TypeVar, get_args

from sqlalchemy.orm import Session
from sqlalchemy.sql.elements import ColumnElement
from sqlmodel import col

from sentibench.exceptions import CouldNotStoreRunException, RecordDoesNotPossessAttributeException
from sentibench.logger import sentibench_logger
from sentibench.store.entity import SQLModelEntity

GenericEntity = TypeVar("GenericEntity", bound=SQLModelEntity)


def _entity_payload(entity: SQLModelEntity) -> Dict[str, Any]:
    dump = getattr(entity, "model_dump", None)
    return dump() if dump is not None else entity.dict()


class BaseRepository(Generic[GenericEntity], ABC):
    """Abstract base class for all repositories"""

    _default_excluded_keys = ["_sa_instance_state"]

    def __init__(self, logger: Optional[Any] = None, sensitive_attribute_keys: Optional[List[str]] = None):
        """Initializes the repository

        Args:
            logger (Any, optional): The structlog logger to use. Defaults to None and will use the shared sentibench logger.
            sensitive_attribute_keys (List[str], optional): Attributes that should be excluded from the logs. Defaults to None.

        Notes:
            - The default exclusion list (_default_excluded_keys) is ["_sa_instance_state"], the SQLAlchemy attribute added to all entities.
        """
        self.entity = self._entity_class()
        self.logger = logger if logger is not None else sentibench_logger
        self.sensitive_attribute_keys = sensitive_attribute_keys if sensitive_attribute_keys is not None else []

    @abstractmethod
    def get_session(self) -> Session:
        """Provides a session to work with"""
        raise NotImplementedError

    def find(self, **kwargs) -> List[GenericEntity]:
        """Get multiple entities with one query by filters

        Args:
            **kwargs: The filters to apply

        Returns:
            List[GenericEntity]: The entities matching all filters

        Notes:
            - Success log is covered by get_batch
        """
        self._emit_operation_begin_log("Finding", **kwargs)
        filters = self._create_filters(**kwargs)
        return self.get_batch(filters=filters)

    def get_batch(self, filters: Optional[List[ColumnElement]] = None) -> List[GenericEntity]:
        """Retrieves the entities matching the filters, ordered by ID

        Args:
            filters (Optional[List[ColumnElement]]): Column conditions; all entities when None
        """
        session = self.get_session()
        filters = filters if filters is not None else []
        self._emit_operation_begin_log("Batch get")

        result = session.query(self.entity).filter(*filters).order_by(self.entity.id).all()

        self._emit_operation_success_log("Batch get", entities=result)
        return result

    def create(self, entity: GenericEntity) -> GenericEntity:
        """Adds a new entity to the database

        Returns:
             GenericEntity: The stored entity with its generated ID

        Raises:
            CouldNotStoreRunException: If the insert failed
        """
        session = self.get_session()
        self._emit_operation_begin_log("Creating", entities=[entity])

        try:
            session.add(entity)
            session.commit()
            session.refresh(entity)
        except Exception as exception:
            session.rollback()
            raise CouldNotStoreRunException(f"Could not store {self.entity.__name__}") from exception

        self._emit_operation_success_log("Creating", entities=[entity])
        return entity

    def delete_batch(self, entities: List[GenericEntity]) -> None:
        """Deletes a batch of entities in one transaction

        Raises:
            CouldNotStoreRunException: If the deletion failed
        """
        session = self.get_session()
        self._emit_operation_begin_log("Batch deleting", entities=entities)

        try:
            for entity in entities:
                session.delete(entity)
            session.commit()
        except Exception as exception:
            session.rollback()
            raise CouldNotStoreRunException(f"Could not delete a batch of {self.entity.__name__}") from exception

        self._emit_operation_success_log("Batch deleting", entities=entities)

    def _create_filters(self, **kwargs) -> List[ColumnElement]:
        """Creates equality filters for a query

        Raises:
            RecordDoesNotPossessAttributeException: If the entity has no such column
        """
        filters = []
        for key, value in kwargs.items():
            try:
                filters.append(col(getattr(self.entity, key)) == value)
            except AttributeError as attribute_error:
                raise RecordDoesNotPossessAttributeException(f"Entity {self.entity.__name__} does not have the attribute {key}") from attribute_error
        return filters

    def _safe_kwargs(self, prefix: str = "", **kwargs) -> Dict[str, Any]:
        """Filters out sensitive attributes from the log kwargs"""
        excluded_keys = [*self.sensitive_attribute_keys, *self._default_excluded_keys]
        return {f"{prefix}{key}": value for key, value in kwargs.items() if key not in excluded_keys}

    def _emit_operation_success_log(self, operation: str, entities: Optional[List[GenericEntity]] = None) -> None:
        entities = entities or []
        try:
            self.logger.debug(f"{operation} {self.entity.__name__} succeeded", entity_ids=[entity.id for entity in entities])
        except Exception as exception:  # pylint: disable=broad-except
            # Logs must be written by all means. It's no silent passing and thereby acceptable.
            self.logger.exception(f"Could not emit log for concluding {operation} {self.entity.__name__}", exception=repr(exception))

    def _emit_operation_begin_log(self, operation: str, entities: Optional[List[GenericEntity]] = None, **kwargs) -> None:
        entities = entities or []
        try:
            entity_payloads = [self._safe_kwargs(**_entity_payload(entity)) for entity in entities]
            entity_log: Dict[str, Any] = {**entity_payloads[0]} if len(entity_payloads) == 1 else {"payload": entity_payloads}
            kwargs_log = self._safe_kwargs(prefix="kwarg_", **kwargs)  # Prefix avoids clashes with entity attributes
            self.logger.debug(f"{operation} {self.entity.__name__}", **entity_log, **kwargs_log)
        except Exception as exception:  # pylint: disable=broad-except
            # Logs must be written by all means. It's no silent passing and thereby acceptable.
            self.logger.warning(f"Could not emit log for starting {operation} {self.entity.__name__}", exception=repr(exception))

    @classmethod
    @lru_cache(maxsize=1)
    def _entity_class(cls) -> Type[GenericEntity]:
        """Retrieves the managed entity class from the generic base at runtime

        Raises:
            TypeError: If the type argument is not an entity class
        """
        generic_alias = getattr(cls, "__orig_bases__")[0]
        entity_class = get_args(generic_alias)[0]

        if not isinstance(entity_class, type) or not issubclass(entity_class, SQLModelEntity):
            raise TypeError(f"Entity class {entity_class} for {cls.__name__} must be a subclass of {SQLModelEntity}")

        return entity_class  # type: ignore
