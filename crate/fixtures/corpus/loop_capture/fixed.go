func Notify(users []User, send func(User) error) error {
	g := new(errgroup.Group)
	for _, u := range users {
		u := u
		g.Go(func() error {
			err := send(u)
			return err
		})
	}
	return g.Wait()
}
