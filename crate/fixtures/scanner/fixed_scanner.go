package scanner

import (
	"sync"
	"time"

	"example.com/scanner/sharding"
)

type shardLock struct {
	owner string
}

type Scanner[ROW any] struct {
	shardCtrl sharding.Controller
	interval  time.Duration
	lockMap   sync.Map
	stop      chan struct{}
}

func (t *Scanner[ROW]) runForever() {
	for {
		select {
		case <-t.stop:
			return
		case <-time.After(t.interval):
		}
		go t.runShards()
	}
}

func (t *Scanner[ROW]) runShards() {
	newShards := t.shardCtrl.MyShards()
	t.lockMap.Range(func(key, value interface{}) bool {
		shardKey := key.(sharding.ShardKey)
		if _, ok := newShards[shardKey]; !ok {
			t.lockMap.Delete(shardKey)
		}
		return true
	})
}
